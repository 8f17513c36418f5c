//! Command-line front end: scenario runs, certificates, parameter sweeps,
//! mean-field studies and characteristic roots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flocking::diagnostics::check_flocking_condition;
use flocking::influence::InfluenceFunction;
use flocking::integrator::{IntegratorConfig, Scheme};
use flocking::meanfield::{
    convergence_study, sampled_offsets, stability_ratio, DatumSpec, VelocityLaw,
};
use flocking::quadrature::QuadratureConfig;
use flocking::roots::characteristic_roots;
use flocking::scenario::{
    builtin_scenario, builtin_scenarios, convergence_csv_string, run_scenario,
    stability_csv_string, sweep, with_overrides, ScenarioConfig, SweepParameter,
};
use flocking::Error;

#[derive(Parser)]
#[command(name = "flocksim", version, about = "Delayed Cucker-Smale flocking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioSource {
    /// Path to a scenario config (JSON).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Name of a builtin scenario (see `scenarios list`).
    #[arg(long)]
    scenario: Option<String>,
    /// Override the delay.
    #[arg(long)]
    tau: Option<f64>,
    /// Override the time step (snapped to an exact divisor of tau).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the scheme.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "euler" => Ok(Scheme::ExplicitEuler),
        "rk4" => Ok(Scheme::RungeKutta4),
        other => Err(format!("unknown scheme {other:?} (euler|rk4)")),
    }
}

impl ScenarioSource {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let base = match (&self.config, &self.scenario) {
            (Some(path), _) => ScenarioConfig::from_json_file(path)?,
            (None, Some(name)) => builtin_scenario(name)?,
            (None, None) => {
                return Err(Error::Config("pass --config <path> or --scenario <name>".into()))
            }
        };
        with_overrides(&base, self.tau, self.dt, self.scheme)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its artifact bundle.
    Simulate {
        #[command(flatten)]
        source: ScenarioSource,
        /// Output directory (bundle goes to <out>/<scenario>/).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the flocking certificate of a scenario's initial datum.
    Certify {
        #[command(flatten)]
        source: ScenarioSource,
    },
    /// Re-run a scenario over a list of parameter values.
    Sweep {
        #[command(flatten)]
        source: ScenarioSource,
        /// Which parameter to vary: tau | dt | beta.
        #[arg(long)]
        param: SweepParameter2,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Optional path for the JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean-field convergence study over increasing particle counts.
    Converge {
        /// Comma-separated increasing particle counts; largest is the reference.
        #[arg(long = "n-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "t-max", default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Compare clouds every k-th recorded node.
        #[arg(long, default_value_t = 25)]
        compare_stride: usize,
        /// Directory for converge.csv + converge.meta.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturbation-growth study: Wasserstein ratio between a seeded datum
    /// and a velocity-perturbed copy.
    Stability {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Perturbation size applied to the initial velocities.
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long = "t-max", default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory for stability.csv + stability.meta.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic roots of the two-particle velocity-difference dynamics.
    Roots {
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Inspect the builtin scenario library.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
}

/// clap-friendly wrapper so `--param tau` parses via FromStr.
#[derive(Clone, Copy)]
struct SweepParameter2(SweepParameter);

impl std::str::FromStr for SweepParameter2 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<SweepParameter>().map(SweepParameter2).map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum ScenariosAction {
    /// List builtin scenario names.
    List,
    /// Print a builtin scenario config as JSON.
    Show { name: String },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Json(_) => {
            ExitCode::from(2)
        }
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { source, out } => {
            let cfg = source.load()?;
            let bundle = run_scenario(&cfg, Some(&out))?;
            let dir = bundle.out_dir.as_ref().expect("out dir was requested");
            println!(
                "{}: {} (d_V end = {:.3e}); certificate satisfied = {}; wrote {}",
                cfg.name,
                summarize(&bundle.classification),
                bundle.summary.series.last().map_or(f64::NAN, |r| r.d_v),
                bundle.certificate.satisfied,
                dir.display()
            );
            Ok(())
        }
        Command::Certify { source } => {
            let cfg = source.load()?;
            let cert =
                check_flocking_condition(&cfg.build_history()?, &cfg.psi, &QuadratureConfig::default())?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(())
        }
        Command::Sweep { source, param, values, out } => {
            let cfg = source.load()?;
            let table = sweep(&cfg, param.0, &values)?;
            for row in &table.rows {
                match &row.error {
                    None => println!(
                        "{:>12} = {:<8} -> {} (fitted rate {})",
                        format!("{:?}", table.parameter).to_lowercase(),
                        row.value,
                        row.classification.as_ref().map_or_else(String::new, summarize),
                        row.fitted_decay_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
                    ),
                    Some(e) => println!("{:>12} = {:<8} -> failed: {e}", "value", row.value),
                }
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&table)?)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Converge { n_list, tau, d, t_max, seed, compare_stride, out } => {
            let spec = DatumSpec {
                d,
                x_lo: 0.0,
                x_hi: 1.0,
                velocities: VelocityLaw::Alternating { speed: 1.0 },
            };
            let cfg = IntegratorConfig::default_for_tau(tau, t_max);
            let psi = InfluenceFunction::exponential();
            let study = convergence_study(&spec, &n_list, tau, &psi, &cfg, seed, compare_stride)?;
            println!("N_ref = {}, seed = {}", study.n_reference, study.seed);
            for (n, worst) in &study.summary {
                println!("N = {n:>6}: max_t d1 = {worst:.6}");
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("converge.csv"), convergence_csv_string(&study))?;
                std::fs::write(
                    dir.join("converge.meta.json"),
                    serde_json::to_string_pretty(&study)?,
                )?;
                println!("wrote {}", dir.join("converge.csv").display());
            }
            Ok(())
        }
        Command::Stability { n, tau, d, epsilon, t_max, seed, out } => {
            let spec = DatumSpec {
                d,
                x_lo: 0.0,
                x_hi: 1.0,
                velocities: VelocityLaw::Alternating { speed: 1.0 },
            };
            let base = spec.sample_history_seeded(n, tau, seed)?;
            let (dx, dv) = sampled_offsets(n, d, 0.0, epsilon, seed.wrapping_add(1));
            let perturbed = base.perturbed(&dx, &dv)?;
            let cfg = IntegratorConfig::default_for_tau(tau, t_max);
            let series = stability_ratio(&base, &perturbed, &InfluenceFunction::exponential(), &cfg)?;
            let max_ratio = series.ratios.iter().cloned().fold(0.0f64, f64::max);
            println!(
                "denominator = {:.3e}, max ratio on [0, {t_max}] = {max_ratio:.4}",
                series.denominator
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("stability.csv"), stability_csv_string(&series))?;
                std::fs::write(
                    dir.join("stability.meta.json"),
                    serde_json::to_string_pretty(&serde_json::json!({
                        "n": n, "tau": tau, "d": d, "epsilon": epsilon,
                        "t_max": t_max, "seed": seed,
                        "denominator": series.denominator,
                    }))?,
                )?;
                println!("wrote {}", dir.join("stability.csv").display());
            }
            Ok(())
        }
        Command::Roots { tau, count } => {
            let set = characteristic_roots(tau, count)?;
            println!("{:>14} {:>14} {:>12}", "mu", "sigma", "residual");
            for r in &set.roots {
                println!("{:>14.8} {:>14.8} {:>12.3e}", r.mu, r.sigma, r.residual);
            }
            if !set.complete {
                println!("(incomplete: {} of {count} roots converged)", set.roots.len());
            }
            Ok(())
        }
        Command::Scenarios { action } => match action {
            ScenariosAction::List => {
                for s in builtin_scenarios() {
                    println!("{}", s.name);
                }
                Ok(())
            }
            ScenariosAction::Show { name } => {
                let cfg = builtin_scenario(&name)?;
                println!("{}", cfg.to_json_pretty()?);
                Ok(())
            }
        },
    }
}

fn summarize(b: &flocking::diagnostics::Behavior) -> String {
    use flocking::diagnostics::Behavior;
    match b {
        Behavior::Flocking { rate } => match rate {
            Some(r) => format!("Flocking (fitted rate {r:.4})"),
            None => "Flocking".into(),
        },
        Behavior::Oscillatory => "Oscillatory".into(),
        Behavior::NonFlocking => "NonFlocking".into(),
    }
}
