//! Cross-module invariants along integrated runs: the dissipative bound for
//! d_V on monotone-decay runs, Lyapunov monotonicity, the weight-entry lower
//! bound, bounded spread and certified decay under a satisfied certificate,
//! and the force-field bounds on compact supports.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flocking::diagnostics::{
    check_flocking_condition, dissipation_check, fit_decay_rate, lyapunov, spatial_diameter,
    velocity_diameter, Behavior,
};
use flocking::influence::InfluenceFunction;
use flocking::integrator::{integrate, IntegratorConfig};
use flocking::meanfield::{
    kinetic_flocking_certificate, meanfield_force, wasserstein1_points, EmpiricalMeasure,
    MeasureHistory, Normalization, PhasePoint,
};
use flocking::particles::{communication_weights, AgentVectors, InitialHistory};
use flocking::quadrature::QuadratureConfig;
use flocking::scenario::{builtin_scenario, run_scenario, sweep, SweepParameter};

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn d1(points: &[f64]) -> AgentVectors {
    points.iter().map(|&x| vec![x]).collect()
}

/// A small certified configuration: two slow agents, exponential kernel.
fn certified_pair() -> (InitialHistory, InfluenceFunction) {
    let history = InitialHistory::constant_velocity(0.25, d1(&[0.05, -0.05])).unwrap();
    (history, InfluenceFunction::exponential())
}

#[test]
fn dissipative_bound_holds_on_monotone_runs() {
    for name in ["fig2_tau025", "fig3_tau025", "fig3_tau1"] {
        let cfg = builtin_scenario(name).unwrap();
        let bundle = run_scenario(&cfg, None).unwrap();
        let report = dissipation_check(&bundle.trajectory).unwrap();
        let d_v0 = velocity_diameter(&bundle.trajectory.states[0]);
        let tol = 1e-4 * (1.0 + d_v0);
        assert!(
            report.max_violation <= tol,
            "{name}: dissipation margin {} above tol {tol} ({} checked, {} kinks skipped)",
            report.max_violation,
            report.checked,
            report.skipped_kinks
        );
    }
}

#[test]
fn dissipative_bound_holds_on_certified_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let mut tested = 0;
    for k in 0..20 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=2usize);
        let tau = rng.gen_range(0.05..0.2);
        let psi = if k % 2 == 0 {
            InfluenceFunction::exponential()
        } else {
            InfluenceFunction::cucker_smale(1.0).unwrap()
        };
        let positions: AgentVectors = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(0.0..0.3)).collect())
            .collect();
        let velocities: AgentVectors = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-0.05..0.05)).collect())
            .collect();
        let history = InitialHistory::linear_motion(tau, positions, velocities).unwrap();
        let cert = check_flocking_condition(&history, &psi, &quad()).unwrap();
        if !cert.satisfied {
            continue;
        }
        tested += 1;
        let traj = integrate(&history, &psi, &IntegratorConfig::default_for_tau(tau, 8.0)).unwrap();
        let report = dissipation_check(&traj).unwrap();
        let d_v0 = velocity_diameter(&traj.states[0]);
        assert!(
            report.max_violation <= 5e-4 * (1.0 + d_v0),
            "run {k}: dissipation margin {}",
            report.max_violation
        );
    }
    assert!(tested >= 10, "only {tested} certified runs");
}

#[test]
fn lyapunov_monotone_along_three_particle_run() {
    let cfg = builtin_scenario("fig2_tau025").unwrap();
    let bundle = run_scenario(&cfg, None).unwrap();
    let traj = &bundle.trajectory;
    let l0 = lyapunov(traj, 0.0, &quad()).unwrap();
    let tol = 1e-4 * (1.0 + l0);
    let mut prev = f64::INFINITY;
    let mut t = 0.0;
    while t <= traj.t_end() + 1e-9 {
        let l = lyapunov(traj, t.min(traj.t_end()), &quad()).unwrap();
        assert!(l <= prev + tol, "L rose from {prev} to {l} near t = {t}");
        prev = l;
        t += 0.1;
    }
}

#[test]
fn weight_entries_respect_the_kernel_floor() {
    // off-diagonal entries stay above psi(d_X(t - tau) + R_v tau) / N
    for name in ["fig2_tau025", "fig3_tau1"] {
        let cfg = builtin_scenario(name).unwrap();
        let bundle = run_scenario(&cfg, None).unwrap();
        let traj = &bundle.trajectory;
        let start = traj.first_nonnegative_index();
        for k in (start..traj.times.len()).step_by(50) {
            let now = &traj.states[k];
            let delayed = traj.state_at(traj.times[k] - traj.tau).unwrap();
            let w = communication_weights(&now.positions, &delayed.positions, &cfg.psi).unwrap();
            let floor = cfg
                .psi
                .eval(spatial_diameter(&delayed) + traj.r_v * traj.tau)
                .unwrap()
                / now.n() as f64;
            for i in 0..now.n() {
                for j in 0..now.n() {
                    if i != j {
                        assert!(
                            w.row(i)[j] >= floor - 1e-12,
                            "{name}: weight {} below floor {floor} at t = {}",
                            w.row(i)[j],
                            traj.times[k]
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn certified_runs_keep_bounded_spread_and_outrun_the_certified_rate() {
    let (history, psi) = certified_pair();
    let cert = check_flocking_condition(&history, &psi, &quad()).unwrap();
    assert!(cert.satisfied);
    let d_star = cert.d_star.unwrap();
    let c = cert.decay_rate_c.unwrap();
    let traj = integrate(&history, &psi, &IntegratorConfig::default_for_tau(0.25, 10.0)).unwrap();
    let start = traj.first_nonnegative_index();
    for k in start..traj.times.len() {
        let delayed = traj.state_at(traj.times[k] - traj.tau).unwrap();
        let spread = spatial_diameter(&delayed) + traj.r_v * traj.tau;
        assert!(
            spread <= d_star + 1e-3 * (1.0 + d_star),
            "spread {spread} above d_star {d_star} at t = {}",
            traj.times[k]
        );
    }
    // the fitted decay is at least the certified lower bound
    let fit = fit_decay_rate(&traj, 0.0, 10.0).unwrap();
    assert!(
        fit.rate >= c - 0.05,
        "fitted rate {} under certified rate {c}",
        fit.rate
    );
}

#[test]
fn kinetic_certificate_gives_measure_level_decay() {
    let (history, psi) = certified_pair();
    let mh = MeasureHistory::from_initial_history(&history, 100).unwrap();
    let cert = kinetic_flocking_certificate(&mh, &psi, &quad()).unwrap();
    assert!(cert.satisfied);
    let c = cert.decay_rate_c.unwrap();
    let hist_max = mh.nodes().map(|(_, m)| m.support_diameters().1).fold(0.0f64, f64::max);
    let traj = integrate(&history, &psi, &IntegratorConfig::default_for_tau(0.25, 10.0)).unwrap();
    let start = traj.first_nonnegative_index();
    for k in (start..traj.times.len()).step_by(20) {
        let measure = EmpiricalMeasure::from_state(&traj.states[k]);
        let dv = measure.support_diameters().1;
        let envelope = hist_max * (-c * traj.times[k]).exp() + 5e-3;
        assert!(dv <= envelope, "d_V[f_t] = {dv} above {envelope} at t = {}", traj.times[k]);
    }
}

#[test]
fn classification_stable_across_step_sizes() {
    let base = builtin_scenario("fig2_tau1").unwrap();
    let table = sweep(&base, SweepParameter::Dt, &[1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0]).unwrap();
    let mut kinds = Vec::new();
    for row in &table.rows {
        assert!(row.error.is_none(), "dt = {} failed: {:?}", row.value, row.error);
        kinds.push(std::mem::discriminant(row.classification.as_ref().unwrap()));
    }
    assert!(kinds.windows(2).all(|w| w[0] == w[1]), "classification changed with dt");
}

#[test]
fn delay_sweep_splits_the_four_particle_run() {
    let base = builtin_scenario("fig3_tau025").unwrap();
    let table = sweep(&base, SweepParameter::Tau, &[0.25, 1.0]).unwrap();
    assert!(matches!(table.rows[0].classification, Some(Behavior::Flocking { .. })));
    assert!(matches!(table.rows[1].classification, Some(Behavior::NonFlocking)));

    let fig1 = builtin_scenario("fig1_tau025").unwrap();
    let table = sweep(&fig1, SweepParameter::Tau, &[0.25, 1.0]).unwrap();
    for row in &table.rows {
        assert!(matches!(row.classification, Some(Behavior::Flocking { .. })));
    }
}

#[test]
fn force_field_bounds_on_compact_support() {
    // |F| <= R (sup psi / psi(2R) + 1) and the Lipschitz constant built from
    // the kernel bounds, checked on sampled points inside the support ball
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 32;
    let points: Vec<PhasePoint> = (0..n)
        .map(|_| PhasePoint {
            x: (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            v: (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        })
        .collect();
    let measure = EmpiricalMeasure::new(points).unwrap();
    let r = measure
        .points()
        .iter()
        .flat_map(|p| [&p.x, &p.v])
        .map(|u| u.iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let psi = InfluenceFunction::exponential();
    let psi_star = psi.eval(2.0 * r).unwrap();
    let sup = psi.sup_bound();
    let lip = psi.lipschitz_bound();
    let force_bound = r * (sup / psi_star + 1.0);
    let k_x = 2.0 * (r + 1.0) * r.max(1.0) * sup * lip / (psi_star * psi_star);

    let draw_point = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
        (
            (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    };
    for _ in 0..300 {
        let (x, v) = draw_point(&mut rng);
        let (x2, v2) = draw_point(&mut rng);
        let f1 = meanfield_force(&measure, &x, &v, &psi, Normalization::IncludeAll).unwrap();
        let f2 = meanfield_force(&measure, &x2, &v2, &psi, Normalization::IncludeAll).unwrap();
        let norm = |u: &[f64]| u.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(norm(&f1) <= force_bound + 1e-12, "|F| = {} above {force_bound}", norm(&f1));
        let diff = f1.iter().zip(f2.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dx = x.iter().zip(x2.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dv = v.iter().zip(v2.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let allowed = k_x.max(1.0) * (dx + dv) + 1e-12;
        assert!(diff <= allowed, "|dF| = {diff} above {allowed}");
    }
}

#[test]
fn empirical_measures_from_runs() {
    let cfg = builtin_scenario("fig1_tau025").unwrap();
    let bundle = run_scenario(&cfg, None).unwrap();
    let m = EmpiricalMeasure::from_trajectory(&bundle.trajectory, 0.0).unwrap();
    let vs: Vec<f64> = m.points().iter().map(|p| p.v[0]).collect();
    assert_eq!(vs, vec![1.0, -1.0]);
    assert!(EmpiricalMeasure::from_trajectory(&bundle.trajectory, 1e9).is_err());

    // a consensus run keeps a single shared velocity coordinate
    let h = InitialHistory::constant_velocity(0.25, d1(&[0.4, 0.4, 0.4])).unwrap();
    let traj = integrate(
        &h,
        &InfluenceFunction::exponential(),
        &IntegratorConfig::default_for_tau(0.25, 2.0),
    )
    .unwrap();
    let m = EmpiricalMeasure::from_trajectory(&traj, 2.0).unwrap();
    assert!(m.points().iter().all(|p| (p.v[0] - 0.4).abs() < 1e-12));
}

proptest! {
    #[test]
    fn prop_weight_rows_stochastic(
        seed in 0u64..1_000_000,
        n in 2usize..12,
        d in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> AgentVectors {
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(-50.0..50.0)).collect()).collect()
        };
        let now = draw(&mut rng);
        let delayed = draw(&mut rng);
        let psi = InfluenceFunction::cucker_smale(2.5).unwrap();
        let w = communication_weights(&now, &delayed, &psi).unwrap();
        for (i, row) in w.entries().iter().enumerate() {
            prop_assert_eq!(row[i], 0.0);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn prop_wasserstein_translation_invariant_shift(
        seed in 0u64..1_000_000,
        n in 1usize..6,
        shift in -3.0f64..3.0,
    ) {
        // shifting both clouds by the same vector preserves d_1, and
        // shifting one cloud moves d_1 by at most |shift|
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
        };
        let a = cloud(&mut rng);
        let b = cloud(&mut rng);
        let move_all = |cloud: &[Vec<f64>]| -> Vec<Vec<f64>> {
            cloud.iter().map(|p| vec![p[0] + shift, p[1]]).collect()
        };
        let base = wasserstein1_points(&a, &b).unwrap();
        let both = wasserstein1_points(&move_all(&a), &move_all(&b)).unwrap();
        prop_assert!((base - both).abs() < 1e-10);
        let one = wasserstein1_points(&move_all(&a), &b).unwrap();
        prop_assert!((one - base).abs() <= shift.abs() + 1e-10);
    }
}
