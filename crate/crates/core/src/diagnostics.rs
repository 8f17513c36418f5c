//! Flocking observables and certificates: diameters, the sufficient flocking
//! condition with its certified decay rate, the Lyapunov functional, lemma
//! checks along trajectories, and behavior classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::InfluenceFunction;
use crate::integrator::Trajectory;
use crate::particles::{euclidean_distance, AgentVectors, InitialHistory, SystemState};
use crate::quadrature::QuadratureConfig;

/// Maximum pairwise Euclidean distance of a point set (0 for fewer than 2).
pub fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in points.iter().skip(i + 1) {
            best = best.max(euclidean_distance(p, q));
        }
    }
    best
}

/// Indices of a pair attaining the diameter.
fn diameter_argmax(points: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_d = -1.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = euclidean_distance(&points[i], &points[j]);
            if d > best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}

pub fn spatial_diameter(state: &SystemState) -> f64 {
    diameter(&state.positions)
}

pub fn velocity_diameter(state: &SystemState) -> f64 {
    diameter(&state.velocities)
}

/// R_v: maximum speed over the prescribed history, sampled at `dt`.
pub fn max_speed_rv(history: &InitialHistory, dt: f64) -> f64 {
    history.max_speed(dt)
}

/// Velocity diameters d_V(t) on the recorded grid.
pub fn velocity_diameter_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times
        .iter()
        .zip(traj.states.iter())
        .map(|(&t, st)| (t, velocity_diameter(st)))
        .collect()
}

/// Spatial diameters d_X(t) on the recorded grid.
pub fn spatial_diameter_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times
        .iter()
        .zip(traj.states.iter())
        .map(|(&t, st)| (t, spatial_diameter(st)))
        .collect()
}

/// Evaluation of the sufficient flocking condition
/// d_V(0) + int_{-tau}^0 d_V < int_{d_X(-tau) + R_v tau}^inf psi,
/// with the certified decay data when it holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlockingCertificate {
    pub lhs: f64,
    /// Tail integral from d_X(-tau) + R_v tau; +inf (JSON null) in the
    /// heavy-tail (unconditional) regime.
    #[serde(with = "extended_real")]
    pub rhs: f64,
    pub satisfied: bool,
    pub d_star: Option<f64>,
    pub psi_star: Option<f64>,
    #[serde(rename = "decay_rate_C")]
    pub decay_rate_c: Option<f64>,
    #[serde(rename = "R_v")]
    pub r_v: f64,
}

/// JSON has no infinity: encode a divergent value as null.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_some(value)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

/// Shared certificate computation from sampled diameters.
pub(crate) fn certificate_from_diameters(
    d_v_samples: &[(f64, f64)], // (s, d_V(s)) on [-tau, 0], increasing s
    d_x_at_minus_tau: f64,
    r_v: f64,
    tau: f64,
    psi: &InfluenceFunction,
    quad: &QuadratureConfig,
) -> Result<FlockingCertificate> {
    let d_v0 = d_v_samples.last().expect("nonempty history grid").1;
    let mut integral = 0.0;
    for w in d_v_samples.windows(2) {
        integral += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
    }
    let lhs = d_v0 + integral;
    let a0 = d_x_at_minus_tau + r_v * tau;
    let rhs = psi.tail_integral(a0, quad)?.value;
    let satisfied = lhs < rhs;
    let (mut d_star, mut psi_star, mut decay_rate_c) = (None, None, None);
    if satisfied {
        let ds = solve_d_star(psi, a0, lhs, quad)?;
        let ps = psi.eval(ds)?;
        d_star = Some(ds);
        psi_star = Some(ps);
        decay_rate_c = Some(solve_decay_rate(ps.min(1.0), tau)?);
    }
    Ok(FlockingCertificate { lhs, rhs, satisfied, d_star, psi_star, decay_rate_c, r_v })
}

/// Root of int_{a0}^{x} psi = target (monotone in x since psi > 0); bracket
/// grown geometrically, then bisection to 1e-12 in the integral value.
fn solve_d_star(
    psi: &InfluenceFunction,
    a0: f64,
    target: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if target <= 0.0 {
        return Ok(a0);
    }
    let mut hi = a0 + 1.0;
    let mut budget = 400;
    while psi.integral_between(a0, hi, quad)? < target {
        hi = a0 + (hi - a0) * 2.0;
        budget -= 1;
        if budget == 0 || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "d_star bracket growth failed: integral from {a0} never reaches {target}"
            )));
        }
    }
    let mut lo = a0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let val = psi.integral_between(a0, mid, quad)?;
        if (val - target).abs() <= 1e-12 {
            return Ok(mid);
        }
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evaluate the flocking condition for a prescribed history: the left side
/// integrates d_V over [-tau, 0] on a uniform grid (trapezoid, `samples`
/// intervals), the right side is the psi tail from d_X(-tau) + R_v tau.
pub fn check_flocking_condition(
    history: &InitialHistory,
    psi: &InfluenceFunction,
    quad: &QuadratureConfig,
) -> Result<FlockingCertificate> {
    let tau = history.tau();
    let samples = 100usize;
    let dt = tau / samples as f64;
    let mut d_v = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let s = if k == samples { 0.0 } else { -tau + k as f64 * dt };
        let st = history.sample(s)?;
        d_v.push((s, velocity_diameter(&st)));
    }
    let d_x_start = spatial_diameter(&history.sample(-tau)?);
    let r_v = history.max_speed(dt);
    certificate_from_diameters(&d_v, d_x_start, r_v, tau, psi, quad)
}

/// The unique root in (0, 1] of 1 - C = (1 - a) e^(C tau), by bisection.
/// This is the certified exponential decay rate for contraction factor `a`.
pub fn solve_decay_rate(a: f64, tau: f64) -> Result<f64> {
    if !(a > 0.0) || a > 1.0 {
        return Err(Error::Domain(format!("contraction factor must be in (0, 1], got {a}")));
    }
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
    }
    if a == 1.0 {
        return Ok(1.0);
    }
    if tau == 0.0 {
        return Ok(a);
    }
    let g = |c: f64| 1.0 - c - (1.0 - a) * (c * tau).exp();
    // g(0) = a > 0, g(1) < 0, g strictly decreasing
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The Lyapunov functional
/// L(t) = d_V(t) + int_{d_X(-tau)+R_v tau}^{d_X(t-tau)+R_v tau} psi
///      + int_{-tau}^{0} d_V(t+s) ds,
/// evaluated on the recorded grid (trapezoid for the time integral).
pub fn lyapunov(traj: &Trajectory, t: f64, quad: &QuadratureConfig) -> Result<f64> {
    if t < 0.0 || t > traj.t_end() + 1e-9 * traj.dt {
        return Err(Error::OutOfRange { t, lo: 0.0, hi: traj.t_end() });
    }
    let tau = traj.tau;
    let d_v_now = velocity_diameter(&traj.state_at(t)?);
    let a0 = spatial_diameter(&traj.states[0]) + traj.r_v * tau;
    let a_t = spatial_diameter(&traj.state_at(t - tau)?) + traj.r_v * tau;
    let middle = traj.psi.integral_between(a0, a_t, quad)?;

    // trapezoid over [t - tau, t] on the recorded nodes plus the endpoints
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    nodes.push((t - tau, velocity_diameter(&traj.state_at(t - tau)?)));
    let lo_idx = traj.times.partition_point(|&x| x <= t - tau);
    let hi_idx = traj.times.partition_point(|&x| x < t);
    for k in lo_idx..hi_idx {
        nodes.push((traj.times[k], velocity_diameter(&traj.states[k])));
    }
    nodes.push((t, d_v_now));
    let mut hist_term = 0.0;
    for w in nodes.windows(2) {
        hist_term += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
    }
    Ok(d_v_now + middle + hist_term)
}

/// Least-squares exponential rate of d_V on [t0, t1] (positive = decay).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    /// True when the fit window was cut short because d_V reached the
    /// positivity floor.
    pub truncated: bool,
}

pub fn fit_decay_rate(traj: &Trajectory, t0: f64, t1: f64) -> Result<DecayFit> {
    if !(t1 > t0) {
        return Err(Error::Domain(format!("empty fit window [{t0}, {t1}]")));
    }
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut truncated = false;
    let floor = 1e-280f64;
    for (&t, st) in traj.times.iter().zip(traj.states.iter()) {
        if t < t0 || t > t1 {
            continue;
        }
        let dv = velocity_diameter(st);
        if dv <= floor {
            truncated = true;
            break;
        }
        pts.push((t, dv.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::Domain(format!(
            "fit window [{t0}, {t1}] contains {} usable samples (need 2)",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(DecayFit { rate: -slope, truncated })
}

/// Qualitative long-time behavior of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    /// d_V fell below the flocking threshold; `rate` is the fitted decay
    /// exponent when a fit was possible.
    Flocking { rate: Option<f64> },
    /// At least 3 prominent local maxima of d_V after the tail marker with a
    /// non-decreasing envelope.
    Oscillatory,
    NonFlocking,
}

/// Classify a trajectory. `eps_flock` and `t_tail` default to
/// 1e-6 * d_V(0) and half the horizon.
pub fn classify_behavior(traj: &Trajectory, eps_flock: Option<f64>, t_tail: Option<f64>) -> Behavior {
    let start = traj.first_nonnegative_index();
    let series: Vec<(f64, f64)> = traj.times[start..]
        .iter()
        .zip(traj.states[start..].iter())
        .map(|(&t, st)| (t, velocity_diameter(st)))
        .collect();
    let d_v0 = series.first().map_or(0.0, |p| p.1);
    let eps = eps_flock.unwrap_or(1e-6 * d_v0);
    let t_tail = t_tail.unwrap_or(0.5 * traj.t_end());
    let d_v_end = series.last().map_or(0.0, |p| p.1);
    let d_x_bounded = traj.states.iter().all(|st| spatial_diameter(st).is_finite());

    if d_v_end <= eps && d_x_bounded {
        let rate = fit_decay_rate(traj, 0.0, traj.t_end()).ok().map(|f| f.rate);
        return Behavior::Flocking { rate };
    }

    // prominent local maxima after t_tail
    let prominence = 1e-3 * d_v0;
    let mut peaks: Vec<f64> = Vec::new();
    let mut valley = f64::INFINITY;
    let mut pending: Option<f64> = None;
    for w in series.windows(3) {
        let (t, prev, here, next) = (w[1].0, w[0].1, w[1].1, w[2].1);
        valley = valley.min(here);
        if t <= t_tail {
            continue;
        }
        if here >= prev && here > next {
            // candidate peak; confirm once the following valley is deep enough
            pending = Some(here);
            valley = here;
        } else if let Some(p) = pending {
            if p - here >= prominence && p - valley >= prominence {
                peaks.push(p);
                pending = None;
                valley = here;
            }
        }
    }
    // grid sampling jitters peak heights by O(dt^2), so the envelope
    // comparison carries a small relative slack
    let envelope_nondecreasing = peaks.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-3));
    if peaks.len() >= 3 && envelope_nondecreasing {
        Behavior::Oscillatory
    } else {
        Behavior::NonFlocking
    }
}

/// Convex-hull contraction bound: for two stochastic weight vectors with
/// entries >= kappa, the weighted means differ by at most (1 - kappa N) d_V.
/// Returns the comparison (true is guaranteed by the underlying lemma).
pub fn verify_hull_contraction(
    vectors: &AgentVectors,
    weights_a: &[f64],
    weights_b: &[f64],
    kappa: f64,
) -> Result<bool> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::Domain("need at least one vector".into()));
    }
    if !(kappa > 0.0) || kappa > 1.0 / n as f64 + 1e-12 {
        return Err(Error::Domain(format!("kappa must be in (0, 1/N], got {kappa}")));
    }
    for (name, w) in [("first", weights_a), ("second", weights_b)] {
        if w.len() != n {
            return Err(Error::Domain(format!("{name} weight vector length mismatch")));
        }
        if w.iter().any(|&x| x < kappa - 1e-12) {
            return Err(Error::Domain(format!("{name} weight vector has entries below kappa")));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("{name} weight vector sums to {s}, not 1")));
        }
    }
    let d = vectors[0].len();
    let mut diff = vec![0.0; d];
    for i in 0..n {
        for c in 0..d {
            diff[c] += (weights_a[i] - weights_b[i]) * vectors[i][c];
        }
    }
    let lhs = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bound = (1.0 - kappa * n as f64) * diameter(vectors);
    Ok(lhs <= bound + 1e-12)
}

/// Lemma-style runtime checks evaluated along a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissipationReport {
    /// Largest value of (centered d/dt d_V) - [(1 - psi(d_X(t-tau)+R_v tau)) d_V(t-tau) - d_V(t)];
    /// nonpositive (up to discretization) when the differential inequality holds.
    pub max_violation: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Check the dissipative differential inequality for d_V with a centered
/// difference on the recording grid, skipping samples where the diameter's
/// argmax pair changes (kinks of the piecewise-smooth d_V).
pub fn dissipation_check(traj: &Trajectory) -> Result<DissipationReport> {
    let start = traj.first_nonnegative_index();
    if traj.times.len() < start + 3 {
        return Err(Error::Domain("trajectory too short for the dissipation check".into()));
    }
    let tau = traj.tau;
    let mut max_violation = f64::NEG_INFINITY;
    let mut checked = 0;
    let mut skipped = 0;
    for k in (start + 1)..(traj.times.len() - 1) {
        let pair_prev = diameter_argmax(&traj.states[k - 1].velocities);
        let pair_here = diameter_argmax(&traj.states[k].velocities);
        let pair_next = diameter_argmax(&traj.states[k + 1].velocities);
        if pair_prev != pair_here || pair_here != pair_next {
            skipped += 1;
            continue;
        }
        let t = traj.times[k];
        let h = 0.5 * (traj.times[k + 1] - traj.times[k - 1]);
        let ddt = (velocity_diameter(&traj.states[k + 1])
            - velocity_diameter(&traj.states[k - 1]))
            / (2.0 * h);
        let delayed = traj.state_at(t - tau)?;
        let d_v_del = velocity_diameter(&delayed);
        let d_x_del = spatial_diameter(&delayed);
        let bound = (1.0 - traj.psi.eval(d_x_del + traj.r_v * tau)?) * d_v_del
            - velocity_diameter(&traj.states[k]);
        max_violation = max_violation.max(ddt - bound);
        checked += 1;
    }
    Ok(DissipationReport {
        max_violation: if checked == 0 { 0.0 } else { max_violation },
        checked,
        skipped_kinks: skipped,
    })
}

/// Largest excess of any agent speed over R_v along the run (0 when the
/// velocity bound holds exactly).
pub fn velocity_bound_excess(traj: &Trajectory) -> f64 {
    let mut excess = 0.0f64;
    for st in &traj.states {
        for v in &st.velocities {
            let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            excess = excess.max(speed - traj.r_v);
        }
    }
    excess.max(0.0)
}
