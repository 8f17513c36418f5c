//! Scenario configuration, the builtin experiment library, and run
//! orchestration with plot-ready CSV/JSON export.
//!
//! Output layout per run: `<out>/<scenario>/{trajectory.csv,
//! trajectory.meta.json, diagnostics.json, certificate.json}`; CSVs use `.`
//! decimals, a header row and LF line endings, and are byte-identical across
//! reruns of the same config and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_flocking_condition, classify_behavior, dissipation_check, fit_decay_rate,
    spatial_diameter, velocity_bound_excess, velocity_diameter, Behavior, DecayFit,
    FlockingCertificate,
};
use crate::error::{Error, Result};
use crate::influence::InfluenceFunction;
use crate::integrator::{integrate, IntegratorConfig, Scheme, Trajectory};
use crate::meanfield::{ConvergenceStudy, StabilitySeries};
use crate::particles::{AgentVectors, InitialHistory};
use crate::quadrature::QuadratureConfig;

/// Initial-datum part of a scenario config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryConfig {
    /// x_i(s) = v_i s on [-tau, 0].
    ConstantVelocity { velocities: AgentVectors },
    /// x_i(s) = x0_i + v_i s on [-tau, 0].
    LinearMotion { positions0: AgentVectors, velocities: AgentVectors },
    /// A JSON file holding a serialized tabulated history.
    TabulatedFile { path: String },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DiagnosticsThresholds {
    /// Flocking threshold on d_V at the end of the run; default
    /// 1e-6 * d_V(0).
    pub eps_flock: Option<f64>,
    /// Start of the oscillation-detection window; default t_max / 2.
    pub t_tail: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub psi: InfluenceFunction,
    pub history: HistoryConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub thresholds: DiagnosticsThresholds,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("bad scenario name {:?}", self.name)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        let check_shape = |what: &str, vecs: &AgentVectors| -> Result<()> {
            if vecs.len() != self.n {
                return Err(Error::Config(format!(
                    "{what}: expected {} agents, got {}",
                    self.n,
                    vecs.len()
                )));
            }
            if vecs.iter().any(|v| v.len() != self.d) {
                return Err(Error::Config(format!("{what}: expected dimension {}", self.d)));
            }
            Ok(())
        };
        match &self.history {
            HistoryConfig::ConstantVelocity { velocities } => check_shape("velocities", velocities)?,
            HistoryConfig::LinearMotion { positions0, velocities } => {
                check_shape("positions0", positions0)?;
                check_shape("velocities", velocities)?;
            }
            HistoryConfig::TabulatedFile { path } => {
                if !Path::new(path).exists() {
                    return Err(Error::Config(format!("tabulation file {path} does not exist")));
                }
            }
        }
        self.build_history().map(|_| ())
    }

    pub fn build_history(&self) -> Result<InitialHistory> {
        match &self.history {
            HistoryConfig::ConstantVelocity { velocities } => {
                InitialHistory::constant_velocity(self.tau, velocities.clone())
            }
            HistoryConfig::LinearMotion { positions0, velocities } => {
                InitialHistory::linear_motion(self.tau, positions0.clone(), velocities.clone())
            }
            HistoryConfig::TabulatedFile { path } => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read tabulation file {path}: {e}"))
                })?;
                let history: InitialHistory = serde_json::from_str(&text)?;
                if (history.tau() - self.tau).abs() > 1e-12 * self.tau {
                    return Err(Error::Config(format!(
                        "tabulation file covers tau = {}, config says {}",
                        history.tau(),
                        self.tau
                    )));
                }
                if history.n() != self.n || history.dim() != self.d {
                    return Err(Error::Config(format!(
                        "tabulation file is {} agents in dimension {}, config says {} / {}",
                        history.n(),
                        history.dim(),
                        self.n,
                        self.d
                    )));
                }
                Ok(history)
            }
        }
    }
}

fn scalar_agents(values: &[f64]) -> AgentVectors {
    values.iter().map(|&v| vec![v]).collect()
}

/// The experiment library: two-particle runs with opposite unit velocities,
/// the three-particle datum (-10, 0, 20) under the exponential kernel, and
/// the four-particle datum (-0.1, 0, 0.5, 0.6) under the quartic rate, each
/// at delays 0.25 and 1. The three- and four-particle trajectories start
/// from the origin at t = -tau, placing the particles at x_i(0) = v_i tau.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let mut list = Vec::new();
    for tau in [0.25, 1.0] {
        let tag = if tau == 0.25 { "tau025" } else { "tau1" };
        list.push(ScenarioConfig {
            name: format!("fig1_{tag}"),
            n: 2,
            d: 1,
            tau,
            psi: InfluenceFunction::exponential(),
            history: HistoryConfig::ConstantVelocity { velocities: scalar_agents(&[1.0, -1.0]) },
            integrator: IntegratorConfig::default_for_tau(tau, 20.0),
            thresholds: DiagnosticsThresholds::default(),
        });
        let v3 = [-10.0, 0.0, 20.0];
        list.push(ScenarioConfig {
            name: format!("fig2_{tag}"),
            n: 3,
            d: 1,
            tau,
            psi: InfluenceFunction::exponential(),
            history: HistoryConfig::LinearMotion {
                positions0: scalar_agents(&v3.map(|v| v * tau)),
                velocities: scalar_agents(&v3),
            },
            integrator: IntegratorConfig::default_for_tau(tau, 15.0),
            // d_V(0) = 30; flocked when the diameter has dropped by 1e-3
            thresholds: DiagnosticsThresholds { eps_flock: Some(0.03), t_tail: None },
        });
        let v4 = [-0.1, 0.0, 0.5, 0.6];
        list.push(ScenarioConfig {
            name: format!("fig3_{tag}"),
            n: 4,
            d: 1,
            tau,
            psi: InfluenceFunction::cucker_smale(4.0).expect("beta > 0"),
            history: HistoryConfig::LinearMotion {
                positions0: scalar_agents(&v4.map(|v| v * tau)),
                velocities: scalar_agents(&v4),
            },
            integrator: IntegratorConfig::default_for_tau(tau, 60.0),
            thresholds: DiagnosticsThresholds::default(),
        });
    }
    list.sort_by(|a, b| a.name.cmp(&b.name));
    list
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
            Error::Config(format!("unknown scenario {name:?}; builtin: {}", names.join(", ")))
        })
}

/// One (t, d_X, d_V) sample of the diagnostics series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub d_x: f64,
    pub d_v: f64,
}

/// Everything run_scenario knows at the end of a run.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSummary {
    pub scenario: String,
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub dt: f64,
    pub scheme: Scheme,
    #[serde(rename = "R_v")]
    pub r_v: f64,
    pub classification: Behavior,
    pub fitted_decay_rate: Option<f64>,
    pub fit_truncated: bool,
    /// Largest excess of any speed over R_v along the run (velocity bound).
    pub velocity_bound_excess: f64,
    /// Worst margin of the dissipative differential inequality for d_V
    /// (nonpositive up to discretization error when the inequality holds).
    pub dissipation_max_violation: f64,
    pub dissipation_checked: usize,
    pub dissipation_skipped_kinks: usize,
    pub series: Vec<SeriesRow>,
}

pub struct RunBundle {
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub certificate: FlockingCertificate,
    pub classification: Behavior,
    pub summary: DiagnosticsSummary,
    pub out_dir: Option<PathBuf>,
}

/// Integrate the scenario, evaluate certificate + diagnostics, and (when
/// `out_root` is given) write the artifact bundle under
/// `<out_root>/<scenario name>/`.
pub fn run_scenario(config: &ScenarioConfig, out_root: Option<&Path>) -> Result<RunBundle> {
    config.validate()?;
    let history = config.build_history()?;
    let quad = QuadratureConfig::default();
    let certificate = check_flocking_condition(&history, &config.psi, &quad)?;
    let trajectory = integrate(&history, &config.psi, &config.integrator)?;
    let classification =
        classify_behavior(&trajectory, config.thresholds.eps_flock, config.thresholds.t_tail);
    let t_end = trajectory.t_end();
    let fit = fit_decay_rate(&trajectory, 0.05 * t_end, 0.95 * t_end)
        .unwrap_or(DecayFit { rate: f64::NAN, truncated: true });
    let dissipation = dissipation_check(&trajectory)?;

    let series: Vec<SeriesRow> = trajectory
        .times
        .iter()
        .zip(trajectory.states.iter())
        .map(|(&t, st)| SeriesRow { t, d_x: spatial_diameter(st), d_v: velocity_diameter(st) })
        .collect();
    let summary = DiagnosticsSummary {
        scenario: config.name.clone(),
        n: config.n,
        d: config.d,
        tau: config.tau,
        dt: trajectory.dt,
        scheme: config.integrator.scheme,
        r_v: trajectory.r_v,
        classification: classification.clone(),
        fitted_decay_rate: if fit.rate.is_finite() { Some(fit.rate) } else { None },
        fit_truncated: fit.truncated,
        velocity_bound_excess: velocity_bound_excess(&trajectory),
        dissipation_max_violation: dissipation.max_violation,
        dissipation_checked: dissipation.checked,
        dissipation_skipped_kinks: dissipation.skipped_kinks,
        series,
    };

    let out_dir = match out_root {
        Some(root) => {
            let dir = root.join(&config.name);
            fs::create_dir_all(&dir)?;
            write_trajectory_csv(&trajectory, &dir.join("trajectory.csv"))?;
            fs::write(
                dir.join("trajectory.meta.json"),
                serde_json::to_string_pretty(&TrajectoryMeta::of(config, &trajectory))?,
            )?;
            fs::write(dir.join("diagnostics.json"), serde_json::to_string_pretty(&summary)?)?;
            fs::write(dir.join("certificate.json"), serde_json::to_string_pretty(&certificate)?)?;
            Some(dir)
        }
        None => None,
    };

    Ok(RunBundle {
        config: config.clone(),
        trajectory,
        certificate,
        classification,
        summary,
        out_dir,
    })
}

/// Sidecar of the trajectory CSV: config echo plus the resolved grid.
#[derive(Debug, Clone, Serialize)]
struct TrajectoryMeta<'a> {
    config: &'a ScenarioConfig,
    psi: &'a InfluenceFunction,
    tau: f64,
    dt: f64,
    requested_dt: f64,
    scheme: Scheme,
    record_stride: usize,
    #[serde(rename = "R_v")]
    r_v: f64,
}

impl<'a> TrajectoryMeta<'a> {
    fn of(config: &'a ScenarioConfig, traj: &'a Trajectory) -> Self {
        TrajectoryMeta {
            config,
            psi: &traj.psi,
            tau: traj.tau,
            dt: traj.dt,
            requested_dt: traj.requested_dt,
            scheme: traj.scheme,
            record_stride: traj.record_stride,
            r_v: traj.r_v,
        }
    }
}

/// CSV with header `t,x_1_1..x_N_d,v_1_1..v_N_d`, one row per recorded node.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, trajectory_csv_string(traj))?;
    Ok(())
}

pub fn trajectory_csv_string(traj: &Trajectory) -> String {
    let (n, d) = (traj.n(), traj.dim());
    let mut out = String::new();
    out.push('t');
    for which in ["x", "v"] {
        for i in 1..=n {
            for c in 1..=d {
                let _ = write!(out, ",{which}_{i}_{c}");
            }
        }
    }
    out.push('\n');
    for (t, st) in traj.times.iter().zip(traj.states.iter()) {
        let _ = write!(out, "{t}");
        for p in &st.positions {
            for x in p {
                let _ = write!(out, ",{x}");
            }
        }
        for v in &st.velocities {
            for y in v {
                let _ = write!(out, ",{y}");
            }
        }
        out.push('\n');
    }
    out
}

/// CSV `N,t,d1` of a convergence study.
pub fn convergence_csv_string(study: &ConvergenceStudy) -> String {
    let mut out = String::from("N,t,d1\n");
    for row in &study.rows {
        let _ = writeln!(out, "{},{},{}", row.n, row.t, row.d1);
    }
    out
}

/// CSV `t,ratio` of a stability series.
pub fn stability_csv_string(series: &StabilitySeries) -> String {
    let mut out = String::from("t,ratio\n");
    for (t, r) in series.times.iter().zip(series.ratios.iter()) {
        let _ = writeln!(out, "{t},{r}");
    }
    out
}

/// Which scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Tau,
    Dt,
    Beta,
}

impl FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(SweepParameter::Tau),
            "dt" => Ok(SweepParameter::Dt),
            "beta" => Ok(SweepParameter::Beta),
            other => Err(Error::Config(format!("unknown sweep parameter {other:?} (tau|dt|beta)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub classification: Option<Behavior>,
    pub fitted_decay_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub base_scenario: String,
    pub rows: Vec<SweepRow>,
}

fn config_with(base: &ScenarioConfig, parameter: SweepParameter, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    cfg.name = format!("{}_{}{}", base.name, sweep_tag(parameter), value);
    match parameter {
        SweepParameter::Tau => {
            cfg.tau = value;
            // keep dt proportional, and shift linear-motion anchors that
            // were derived from tau in the builtin library
            cfg.integrator.dt = base.integrator.dt * value / base.tau;
            if let (
                HistoryConfig::LinearMotion { positions0, velocities },
                HistoryConfig::LinearMotion { positions0: base_p0, velocities: base_v },
            ) = (&mut cfg.history, &base.history)
            {
                let base_is_tau_anchored = base_p0
                    .iter()
                    .zip(base_v.iter())
                    .all(|(p, v)| {
                        p.iter()
                            .zip(v.iter())
                            .all(|(pi, vi)| (pi - vi * base.tau).abs() < 1e-12)
                    });
                if base_is_tau_anchored {
                    *positions0 = base_v
                        .iter()
                        .map(|v| v.iter().map(|vi| vi * value).collect())
                        .collect();
                    *velocities = base_v.clone();
                }
            }
        }
        SweepParameter::Dt => cfg.integrator.dt = value,
        SweepParameter::Beta => {
            if !matches!(cfg.psi.family(), crate::influence::InfluenceFamily::CuckerSmaleRate { .. }) {
                return Err(Error::Config(
                    "beta sweeps need a cucker_smale influence function".into(),
                ));
            }
            cfg.psi = InfluenceFunction::cucker_smale(value)?;
        }
    }
    Ok(cfg)
}

fn sweep_tag(parameter: SweepParameter) -> &'static str {
    match parameter {
        SweepParameter::Tau => "tau",
        SweepParameter::Dt => "dt",
        SweepParameter::Beta => "beta",
    }
}

/// Apply command-line style overrides to a config. A tau override rescales
/// dt and the tau-anchored builtin initial positions the same way a tau
/// sweep does.
pub fn with_overrides(
    base: &ScenarioConfig,
    tau: Option<f64>,
    dt: Option<f64>,
    scheme: Option<Scheme>,
) -> Result<ScenarioConfig> {
    let mut cfg = match tau {
        Some(t) if (t - base.tau).abs() > 1e-15 => {
            let mut c = config_with(base, SweepParameter::Tau, t)?;
            c.name = base.name.clone();
            c
        }
        _ => base.clone(),
    };
    if let Some(dt) = dt {
        cfg.integrator.dt = dt;
    }
    if let Some(scheme) = scheme {
        cfg.integrator.scheme = scheme;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run the base scenario once per parameter value (values run concurrently);
/// per-value failures are recorded in the table and do not abort the sweep.
pub fn sweep(base: &ScenarioConfig, parameter: SweepParameter, values: &[f64]) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let rows: Vec<SweepRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| {
                scope.spawn(move || match config_with(base, parameter, value) {
                    Ok(cfg) => match run_scenario(&cfg, None) {
                        Ok(bundle) => SweepRow {
                            value,
                            classification: Some(bundle.classification),
                            fitted_decay_rate: bundle.summary.fitted_decay_rate,
                            error: None,
                        },
                        Err(e) => SweepRow {
                            value,
                            classification: None,
                            fitted_decay_rate: None,
                            error: Some(e.to_string()),
                        },
                    },
                    Err(e) => SweepRow {
                        value,
                        classification: None,
                        fitted_decay_rate: None,
                        error: Some(e.to_string()),
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    Ok(SweepTable { parameter, base_scenario: base.name.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_cover_the_experiment_set() {
        let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        for expected in
            ["fig1_tau025", "fig1_tau1", "fig2_tau025", "fig2_tau1", "fig3_tau025", "fig3_tau1"]
        {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
    }

    #[test]
    fn builtin_configs_validate_and_round_trip() {
        for cfg in builtin_scenarios() {
            cfg.validate().unwrap();
            let json = cfg.to_json_pretty().unwrap();
            let back = ScenarioConfig::from_json(&json).unwrap();
            let json2 = back.to_json_pretty().unwrap();
            assert_eq!(json, json2, "round trip changed {}", cfg.name);
        }
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        assert!(matches!(builtin_scenario("fig9_tau0"), Err(Error::Config(_))));
    }

    #[test]
    fn certificate_wire_format_keys() {
        let cert = FlockingCertificate {
            lhs: 0.5,
            rhs: f64::INFINITY,
            satisfied: true,
            d_star: Some(1.0),
            psi_star: Some(0.5),
            decay_rate_c: Some(0.25),
            r_v: 2.0,
        };
        let json = serde_json::to_string(&cert).unwrap();
        assert!(json.contains("\"decay_rate_C\":0.25"), "{json}");
        assert!(json.contains("\"R_v\":2.0"), "{json}");
        assert!(json.contains("\"rhs\":null"), "{json}");
        let back: FlockingCertificate = serde_json::from_str(&json).unwrap();
        assert!(back.rhs.is_infinite());
    }

    #[test]
    fn run_scenario_writes_the_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = builtin_scenario("fig1_tau025").unwrap();
        cfg.integrator.t_max = 2.0; // keep the unit test quick
        let bundle = run_scenario(&cfg, Some(dir.path())).unwrap();
        let out = bundle.out_dir.clone().unwrap();
        for file in
            ["trajectory.csv", "trajectory.meta.json", "diagnostics.json", "certificate.json"]
        {
            assert!(out.join(file).exists(), "missing {file}");
        }
        let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1_1,x_2_1,v_1_1,v_2_1");
        assert!(!csv.contains('\r'));
        // parses back to numbers
        for line in lines.take(3) {
            for field in line.split(',') {
                field.parse::<f64>().unwrap();
            }
        }
        let diag = fs::read_to_string(out.join("diagnostics.json")).unwrap();
        assert!(diag.contains("\"classification\""));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = {
            let mut c = builtin_scenario("fig1_tau025").unwrap();
            c.integrator.t_max = 1.0;
            c
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_scenario(&cfg, Some(d1.path())).unwrap();
        run_scenario(&cfg, Some(d2.path())).unwrap();
        let a = fs::read(d1.path().join("fig1_tau025/trajectory.csv")).unwrap();
        let b = fs::read(d2.path().join("fig1_tau025/trajectory.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let mut cfg = builtin_scenario("fig1_tau025").unwrap();
        cfg.integrator.t_max = 1.0;
        let table = sweep(&cfg, SweepParameter::Tau, &[0.25, -1.0]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[0].classification.is_some());
        assert!(table.rows[1].error.is_some());
    }

    #[test]
    fn beta_sweep_requires_cucker_smale() {
        let cfg = builtin_scenario("fig1_tau025").unwrap();
        let table = sweep(&cfg, SweepParameter::Beta, &[2.0]).unwrap();
        assert!(table.rows[0].error.is_some());
    }

    #[test]
    fn tau_sweep_rescales_builtin_anchors() {
        let base = builtin_scenario("fig3_tau025").unwrap();
        let cfg = config_with(&base, SweepParameter::Tau, 1.0).unwrap();
        match &cfg.history {
            HistoryConfig::LinearMotion { positions0, .. } => {
                assert!((positions0[3][0] - 0.6).abs() < 1e-12);
            }
            _ => panic!("expected linear motion"),
        }
        assert!((cfg.integrator.dt - 0.01).abs() < 1e-15);
    }

    #[test]
    fn parse_sweep_parameter() {
        assert_eq!(SweepParameter::from_str("tau").unwrap(), SweepParameter::Tau);
        assert!(SweepParameter::from_str("gamma").is_err());
    }
}
