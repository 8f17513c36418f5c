//! Empirical measures, the kinetic force field, Wasserstein-1 distances on
//! equal-weight atom clouds, and the stability / mean-field convergence
//! harnesses built on the particle flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::diagnostics::{certificate_from_diameters, diameter, FlockingCertificate};
use crate::error::{Error, Result};
use crate::influence::InfluenceFunction;
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::particles::{euclidean_distance, AgentVectors, InitialHistory, SystemState};
use crate::quadrature::QuadratureConfig;

/// One phase-space atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// An equal-weight point cloud in phase space (total mass 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    points: Vec<PhasePoint>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<PhasePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("empirical measure needs at least one atom".into()));
        }
        let d = points[0].x.len();
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != d || p.v.len() != d {
                return Err(Error::Config(format!("atom {i} has inconsistent dimension")));
            }
            if p.x.iter().chain(p.v.iter()).any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("atom {i} has non-finite coordinates")));
            }
        }
        Ok(EmpiricalMeasure { points })
    }

    pub fn from_state(state: &SystemState) -> Self {
        EmpiricalMeasure {
            points: state
                .positions
                .iter()
                .zip(state.velocities.iter())
                .map(|(x, v)| PhasePoint { x: x.clone(), v: v.clone() })
                .collect(),
        }
    }

    /// The empirical measure of the integrated flow at time t.
    pub fn from_trajectory(traj: &Trajectory, t: f64) -> Result<Self> {
        Ok(Self::from_state(&traj.state_at(t)?))
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].x.len()
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    /// Position- and velocity-support diameters (d_X[g], d_V[g]).
    pub fn support_diameters(&self) -> (f64, f64) {
        let xs: AgentVectors = self.points.iter().map(|p| p.x.clone()).collect();
        let vs: AgentVectors = self.points.iter().map(|p| p.v.clone()).collect();
        (diameter(&xs), diameter(&vs))
    }

    pub fn max_speed(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Replicate every atom `factor` times (mass-preserving for equal
    /// weights; d_1 is invariant under this).
    pub fn replicate(&self, factor: usize) -> Self {
        let mut points = Vec::with_capacity(self.points.len() * factor.max(1));
        for p in &self.points {
            for _ in 0..factor.max(1) {
                points.push(p.clone());
            }
        }
        EmpiricalMeasure { points }
    }

    /// Atoms embedded in R^{2d} as (x, v) concatenations.
    pub fn phase_points(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.x.iter().chain(p.v.iter()).cloned().collect())
            .collect()
    }
}

/// Which atoms enter the normalization of the kinetic force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// The kinetic definition: integrate over every atom.
    IncludeAll,
    /// The discrete convention: omit atom `i` from both sums.
    ExcludeSelf(usize),
}

/// The normalized alignment force
/// F[g](x, v) = int psi(|x - y|)(w - v) dg / int psi(|x - y|) dg
/// for the (delayed) measure g.
pub fn meanfield_force(
    measure_delayed: &EmpiricalMeasure,
    x: &[f64],
    v: &[f64],
    psi: &InfluenceFunction,
    normalization: Normalization,
) -> Result<Vec<f64>> {
    let d = measure_delayed.dim();
    if x.len() != d || v.len() != d {
        return Err(Error::Domain(format!(
            "evaluation point dimension {} does not match measure dimension {d}",
            x.len()
        )));
    }
    let skip = match normalization {
        Normalization::IncludeAll => usize::MAX,
        Normalization::ExcludeSelf(i) => {
            if i >= measure_delayed.n() {
                return Err(Error::Domain(format!(
                    "self index {i} out of range for {} atoms",
                    measure_delayed.n()
                )));
            }
            if measure_delayed.n() < 2 {
                return Err(Error::Config(
                    "excluding the only atom leaves an empty normalization".into(),
                ));
            }
            i
        }
    };
    let mut numer = vec![0.0; d];
    let mut denom = 0.0;
    for (j, p) in measure_delayed.points().iter().enumerate() {
        if j == skip {
            continue;
        }
        let w = psi.eval(euclidean_distance(&p.x, x))?;
        denom += w;
        for c in 0..d {
            numer[c] += w * (p.v[c] - v[c]);
        }
    }
    if denom <= 0.0 {
        return Err(Error::Domain(
            "force normalization vanished despite the positivity clamp".into(),
        ));
    }
    Ok(numer.iter().map(|s| s / denom).collect())
}

/// Wasserstein-1 distance between two equal-size clouds of points in R^m
/// under the Euclidean ground metric: exact assignment for m >= 2, sorting
/// for scalar clouds.
pub fn wasserstein1_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_cloud_pair(a, b)?;
    if a[0].len() == 1 {
        let mut xs: Vec<f64> = a.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = b.iter().map(|p| p[0]).collect();
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let total: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / a.len() as f64);
    }
    wasserstein1_via_assignment(a, b)
}

/// The assignment route, exposed separately so the scalar sorting path can
/// be cross-checked against it.
pub fn wasserstein1_via_assignment(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_cloud_pair(a, b)?;
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| euclidean_distance(p, q)).collect())
        .collect();
    Ok(solve_assignment(&cost)?.total_cost / a.len() as f64)
}

fn check_cloud_pair(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Unsupported("empty point cloud".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Unsupported(format!(
            "only equal-size clouds are comparable, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let m = a[0].len();
    if a.iter().chain(b.iter()).any(|p| p.len() != m) {
        return Err(Error::Unsupported("mixed point dimensions in cloud".into()));
    }
    Ok(())
}

/// d_1 between empirical measures with the Euclidean metric on R^{2d}.
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Unsupported(format!(
            "phase dimensions differ: {} vs {}",
            mu.dim(),
            nu.dim()
        )));
    }
    wasserstein1_points(&mu.phase_points(), &nu.phase_points())
}

/// A measure-valued initial datum: one empirical measure per grid node on
/// [-tau, 0].
#[derive(Debug, Clone)]
pub struct MeasureHistory {
    tau: f64,
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureHistory {
    pub fn new(tau: f64, times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if times.len() != measures.len() || times.len() < 2 {
            return Err(Error::Config(
                "measure history needs matching times/measures with at least 2 nodes".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("measure history times must be increasing".into()));
        }
        let eps = 1e-9 * tau;
        if times[0] > -tau + eps || *times.last().unwrap() < -eps {
            return Err(Error::Config(format!(
                "measure history must cover [-{tau}, 0], got [{}, {}]",
                times[0],
                times.last().unwrap()
            )));
        }
        let (n, d) = (measures[0].n(), measures[0].dim());
        if measures.iter().any(|m| m.n() != n || m.dim() != d) {
            return Err(Error::Config("measure history nodes must share N and d".into()));
        }
        Ok(MeasureHistory { tau, times, measures })
    }

    /// Atomize a particle-system history on a uniform grid of `samples`
    /// intervals.
    pub fn from_initial_history(history: &InitialHistory, samples: usize) -> Result<Self> {
        let tau = history.tau();
        let samples = samples.max(2);
        let dt = tau / samples as f64;
        let mut times = Vec::with_capacity(samples + 1);
        let mut measures = Vec::with_capacity(samples + 1);
        for k in 0..=samples {
            let s = if k == samples { 0.0 } else { -tau + k as f64 * dt };
            times.push(s);
            measures.push(EmpiricalMeasure::from_state(&history.sample(s)?));
        }
        MeasureHistory::new(tau, times, measures)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &EmpiricalMeasure)> {
        self.times.iter().cloned().zip(self.measures.iter())
    }
}

/// The sufficient flocking condition of the kinetic system, evaluated on
/// measure supports: same computation as the discrete certificate with
/// d_V[g_s], d_X[g_{-tau}] and R_V^0 read from the atoms.
pub fn kinetic_flocking_certificate(
    history: &MeasureHistory,
    psi: &InfluenceFunction,
    quad: &QuadratureConfig,
) -> Result<FlockingCertificate> {
    let d_v: Vec<(f64, f64)> = history
        .nodes()
        .map(|(s, m)| (s, m.support_diameters().1))
        .collect();
    let d_x_start = history.measures[0].support_diameters().0;
    let r_v = history
        .measures
        .iter()
        .map(|m| m.max_speed())
        .fold(0.0, f64::max);
    certificate_from_diameters(&d_v, d_x_start, r_v, history.tau, psi, quad)
}

/// Relative perturbation ratio series for two runs from nearby data:
/// d_1(f^1_t, f^2_t) / max_s d_1(g^1_s, g^2_s).
#[derive(Debug, Clone, Serialize)]
pub struct StabilitySeries {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    /// max over the history grid of d_1 between the two initial data.
    pub denominator: f64,
}

/// Integrate the system from `history` and from a perturbed copy, and track
/// the Wasserstein ratio at every recorded time >= 0. A zero perturbation
/// yields the all-zero series by the 0/0 convention.
pub fn stability_ratio(
    history: &InitialHistory,
    perturbed: &InitialHistory,
    psi: &InfluenceFunction,
    cfg: &IntegratorConfig,
) -> Result<StabilitySeries> {
    if history.n() != perturbed.n() || history.dim() != perturbed.dim() {
        return Err(Error::Config("both histories must share N and d".into()));
    }
    if (history.tau() - perturbed.tau()).abs() > 1e-12 {
        return Err(Error::Config("both histories must share tau".into()));
    }
    let samples = 100usize;
    let base_h = MeasureHistory::from_initial_history(history, samples)?;
    let pert_h = MeasureHistory::from_initial_history(perturbed, samples)?;
    let mut denominator = 0.0f64;
    for ((_, a), (_, b)) in base_h.nodes().zip(pert_h.nodes()) {
        denominator = denominator.max(wasserstein1(a, b)?);
    }

    let t1 = integrate(history, psi, cfg)?;
    let t2 = integrate(perturbed, psi, cfg)?;
    let start = t1.first_nonnegative_index();
    let mut times = Vec::new();
    let mut ratios = Vec::new();
    for k in start..t1.times.len() {
        let t = t1.times[k];
        let ratio = if denominator == 0.0 {
            0.0
        } else {
            let mu = EmpiricalMeasure::from_state(&t1.states[k]);
            let nu = EmpiricalMeasure::from_state(&t2.states[k]);
            wasserstein1(&mu, &nu)? / denominator
        };
        times.push(t);
        ratios.push(ratio);
    }
    Ok(StabilitySeries { times, ratios, denominator })
}

/// Uniform per-agent offsets used to build perturbed initial data.
pub fn sampled_offsets(
    n: usize,
    d: usize,
    position_scale: f64,
    velocity_scale: f64,
    seed: u64,
) -> (AgentVectors, AgentVectors) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: f64| -> AgentVectors {
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
            .collect()
    };
    (draw(position_scale), draw(velocity_scale))
}

/// How initial velocities are drawn in sampled data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum VelocityLaw {
    /// +speed / -speed alternating along the first coordinate.
    Alternating { speed: f64 },
    /// Independent uniform components in [-radius, radius].
    Uniform { radius: f64 },
}

/// A seeded generator of linear-motion initial data: positions uniform in a
/// box, velocities per `VelocityLaw`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatumSpec {
    pub d: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub velocities: VelocityLaw,
}

impl DatumSpec {
    pub fn sample_history_seeded(&self, n: usize, tau: f64, seed: u64) -> Result<InitialHistory> {
        self.sample_history(n, tau, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_history(&self, n: usize, tau: f64, rng: &mut ChaCha8Rng) -> Result<InitialHistory> {
        if !(self.x_hi > self.x_lo) {
            return Err(Error::Config("empty position box".into()));
        }
        let positions: AgentVectors = (0..n)
            .map(|_| (0..self.d).map(|_| rng.gen_range(self.x_lo..self.x_hi)).collect())
            .collect();
        let velocities: AgentVectors = (0..n)
            .map(|i| match self.velocities {
                VelocityLaw::Alternating { speed } => {
                    let mut v = vec![0.0; self.d];
                    v[0] = if i % 2 == 0 { speed } else { -speed };
                    v
                }
                VelocityLaw::Uniform { radius } => {
                    (0..self.d).map(|_| rng.gen_range(-radius..radius)).collect()
                }
            })
            .collect();
        InitialHistory::linear_motion(tau, positions, velocities)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub d1: f64,
}

/// Mean-field convergence data: each smaller cloud against the largest,
/// with rows (N, t, d1) and the worst case over time per N.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// (N, max over t of d1) per compared N, in n_list order.
    pub summary: Vec<(usize, f64)>,
    pub seed: u64,
    pub n_reference: usize,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm_checked(a: usize, b: usize) -> Result<usize> {
    let g = gcd(a as u64, b as u64);
    (a as u64 / g)
        .checked_mul(b as u64)
        .filter(|&l| l <= 1_000_000)
        .map(|l| l as usize)
        .ok_or_else(|| Error::Config(format!("replication size lcm({a}, {b}) is impractical")))
}

/// Integrate the same sampled datum at each N in `n_list` (nested prefixes
/// of one seeded draw) and measure d_1 against the largest N at matching
/// recorded times (every `compare_stride`-th node, t >= 0). Clouds of
/// different sizes are replicated to lcm size before assignment.
pub fn convergence_study(
    spec: &DatumSpec,
    n_list: &[usize],
    tau: f64,
    psi: &InfluenceFunction,
    cfg: &IntegratorConfig,
    seed: u64,
    compare_stride: usize,
) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return Err(Error::Config("empty N list".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("N list must be strictly increasing".into()));
    }
    if n_list[0] < 2 {
        return Err(Error::Config("every N must be at least 2".into()));
    }
    let n_ref = *n_list.last().unwrap();
    if n_list.len() == 1 {
        return Ok(ConvergenceStudy { rows: Vec::new(), summary: Vec::new(), seed, n_reference: n_ref });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = spec.sample_history(n_ref, tau, &mut rng)?;
    let (full_x, full_v) = {
        let st = full.sample(0.0)?;
        (st.positions, st.velocities)
    };

    let integrate_prefix = |n: usize| -> Result<Trajectory> {
        let x0: AgentVectors = full_x[..n].to_vec();
        let v: AgentVectors = full_v[..n].to_vec();
        let h = InitialHistory::linear_motion(tau, x0, v)?;
        integrate(&h, psi, cfg)
    };

    let reference = integrate_prefix(n_ref)?;
    let start = reference.first_nonnegative_index();
    let compare_stride = compare_stride.max(1);

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &n_list[..n_list.len() - 1] {
        let traj = integrate_prefix(n)?;
        let common = lcm_checked(n, n_ref)?;
        let mut worst = 0.0f64;
        let mut k = start;
        while k < reference.times.len() {
            let t = reference.times[k];
            let mu = EmpiricalMeasure::from_state(&traj.states[k]).replicate(common / n);
            let nu = EmpiricalMeasure::from_state(&reference.states[k]).replicate(common / n_ref);
            let d1 = wasserstein1(&mu, &nu)?;
            rows.push(ConvergenceRow { n, t, d1 });
            worst = worst.max(d1);
            k += compare_stride;
        }
        summary.push((n, worst));
    }
    Ok(ConvergenceStudy { rows, summary, seed, n_reference: n_ref })
}
