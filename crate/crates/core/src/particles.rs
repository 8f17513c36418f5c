//! Phase-space state, prescribed initial histories, and the normalized
//! delayed communication weights that drive the velocity dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::InfluenceFunction;

/// One d-dimensional vector per agent.
pub type AgentVectors = Vec<Vec<f64>>;

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_agent_vectors(name: &str, vecs: &AgentVectors, d: usize) -> Result<()> {
    for (i, v) in vecs.iter().enumerate() {
        if v.len() != d {
            return Err(Error::Config(format!(
                "{name}[{i}] has dimension {}, expected {d}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("{name}[{i}] has non-finite components")));
        }
    }
    Ok(())
}

/// Positions and velocities of all agents at one instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub positions: AgentVectors,
    pub velocities: AgentVectors,
}

impl SystemState {
    pub fn new(t: f64, positions: AgentVectors, velocities: AgentVectors) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(Error::Config(format!("system needs at least 2 agents, got {n}")));
        }
        if velocities.len() != n {
            return Err(Error::Config(format!(
                "positions/velocities length mismatch: {n} vs {}",
                velocities.len()
            )));
        }
        let d = positions[0].len();
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {d}")));
        }
        check_agent_vectors("positions", &positions, d)?;
        check_agent_vectors("velocities", &velocities, d)?;
        Ok(SystemState { t, positions, velocities })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions
            .iter()
            .chain(self.velocities.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Prescribed trajectories on [-tau, 0].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum HistoryKind {
    /// x_i(s) = x0_i + v_i s with constant velocity v_i.
    LinearMotion { positions0: AgentVectors, velocities: AgentVectors },
    /// Dense tabulation with linear interpolation between nodes.
    Tabulated { times: Vec<f64>, states: Vec<SystemState> },
}

/// The initial datum of the delay system: position and velocity trajectories
/// on [-tau, 0].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialHistory {
    tau: f64,
    #[serde(flatten)]
    kind: HistoryKind,
}

impl InitialHistory {
    /// Constant velocities with x_i(s) = x0_i + v_i s.
    pub fn linear_motion(tau: f64, positions0: AgentVectors, velocities: AgentVectors) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        // reuse the state checks for shape validation
        SystemState::new(0.0, positions0.clone(), velocities.clone())?;
        Ok(InitialHistory {
            tau,
            kind: HistoryKind::LinearMotion { positions0, velocities },
        })
    }

    /// The builtin constant-velocity datum x_i(s) = v_i s.
    pub fn constant_velocity(tau: f64, velocities: AgentVectors) -> Result<Self> {
        let zeros = vec![vec![0.0; velocities.first().map_or(0, Vec::len)]; velocities.len()];
        Self::linear_motion(tau, zeros, velocities)
    }

    /// Dense tabulation on a grid covering [-tau, 0]; linear interpolation
    /// between nodes.
    pub fn tabulated(tau: f64, times: Vec<f64>, states: Vec<SystemState>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::Config(
                "tabulated history needs matching times/states with at least 2 nodes".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated history times must be increasing".into()));
        }
        let eps = 1e-9 * tau;
        if times[0] > -tau + eps || *times.last().unwrap() < -eps {
            return Err(Error::Config(format!(
                "tabulated history must cover [-{tau}, 0], got [{}, {}]",
                times[0],
                times.last().unwrap()
            )));
        }
        let (n, d) = (states[0].n(), states[0].dim());
        if states.iter().any(|s| s.n() != n || s.dim() != d) {
            return Err(Error::Config("tabulated history states must share N and d".into()));
        }
        Ok(InitialHistory { tau, kind: HistoryKind::Tabulated { times, states } })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            HistoryKind::LinearMotion { velocities, .. } => velocities.len(),
            HistoryKind::Tabulated { states, .. } => states[0].n(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            HistoryKind::LinearMotion { velocities, .. } => velocities[0].len(),
            HistoryKind::Tabulated { states, .. } => states[0].dim(),
        }
    }

    /// Sample the prescribed datum at s in [-tau, 0].
    pub fn sample(&self, s: f64) -> Result<SystemState> {
        let eps = 1e-9 * self.tau.max(1.0);
        if s < -self.tau - eps || s > eps {
            return Err(Error::OutOfRange { t: s, lo: -self.tau, hi: 0.0 });
        }
        let s = s.clamp(-self.tau, 0.0);
        match &self.kind {
            HistoryKind::LinearMotion { positions0, velocities } => {
                let positions = positions0
                    .iter()
                    .zip(velocities.iter())
                    .map(|(x0, v)| x0.iter().zip(v.iter()).map(|(x, vi)| x + vi * s).collect())
                    .collect();
                SystemState::new(s, positions, velocities.clone())
            }
            HistoryKind::Tabulated { times, states } => {
                let i = times.partition_point(|&t| t <= s);
                if i == 0 {
                    return Ok(SystemState { t: s, ..states[0].clone() });
                }
                if i == times.len() {
                    return Ok(SystemState { t: s, ..states.last().unwrap().clone() });
                }
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (s - t0) / (t1 - t0);
                let lerp = |a: &AgentVectors, b: &AgentVectors| -> AgentVectors {
                    a.iter()
                        .zip(b.iter())
                        .map(|(u, v)| u.iter().zip(v.iter()).map(|(x, y)| x * (1.0 - w) + y * w).collect())
                        .collect()
                };
                Ok(SystemState {
                    t: s,
                    positions: lerp(&states[i - 1].positions, &states[i].positions),
                    velocities: lerp(&states[i - 1].velocities, &states[i].velocities),
                })
            }
        }
    }

    /// A copy with per-agent offsets added to positions and velocities
    /// (applied to the anchors of linear-motion data, and uniformly to every
    /// node of tabulated data).
    pub fn perturbed(&self, dx: &AgentVectors, dv: &AgentVectors) -> Result<Self> {
        let (n, d) = (self.n(), self.dim());
        if dx.len() != n || dv.len() != n || dx.iter().chain(dv.iter()).any(|o| o.len() != d) {
            return Err(Error::Config("offset shapes must match the history".into()));
        }
        let shift = |vecs: &AgentVectors, offs: &AgentVectors| -> AgentVectors {
            vecs.iter()
                .zip(offs.iter())
                .map(|(v, o)| v.iter().zip(o.iter()).map(|(a, b)| a + b).collect())
                .collect()
        };
        let kind = match &self.kind {
            HistoryKind::LinearMotion { positions0, velocities } => HistoryKind::LinearMotion {
                positions0: shift(positions0, dx),
                velocities: shift(velocities, dv),
            },
            HistoryKind::Tabulated { times, states } => HistoryKind::Tabulated {
                times: times.clone(),
                states: states
                    .iter()
                    .map(|st| SystemState {
                        t: st.t,
                        positions: shift(&st.positions, dx),
                        velocities: shift(&st.velocities, dv),
                    })
                    .collect(),
            },
        };
        Ok(InitialHistory { tau: self.tau, kind })
    }

    /// R_v: the maximum agent speed over [-tau, 0]. Exact for linear-motion
    /// data (constant velocities); for tabulated data the maximum over the
    /// stored nodes plus a sampling grid of spacing `sampling_dt`.
    pub fn max_speed(&self, sampling_dt: f64) -> f64 {
        match &self.kind {
            HistoryKind::LinearMotion { velocities, .. } => velocities
                .iter()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            HistoryKind::Tabulated { states, .. } => {
                let mut r = 0.0f64;
                let speed_of = |st: &SystemState| {
                    st.velocities
                        .iter()
                        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
                        .fold(0.0, f64::max)
                };
                for st in states {
                    r = r.max(speed_of(st));
                }
                let steps = (self.tau / sampling_dt).ceil().max(1.0) as usize;
                for k in 0..=steps {
                    let s = -self.tau + self.tau * k as f64 / steps as f64;
                    if let Ok(st) = self.sample(s) {
                        r = r.max(speed_of(&st));
                    }
                }
                r
            }
        }
    }
}

/// Row-stochastic, zero-diagonal communication weights.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    entries: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i]
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }
}

/// The normalized weights phi_ik built from psi of the mixed-time distances
/// |x_k(t - tau) - x_i(t)|: zero on the diagonal, each row divided by its
/// off-diagonal sum.
pub fn communication_weights(
    positions_now: &AgentVectors,
    positions_delayed: &AgentVectors,
    psi: &InfluenceFunction,
) -> Result<WeightMatrix> {
    let n = positions_now.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "communication weights need at least 2 agents, got {n}"
        )));
    }
    if positions_delayed.len() != n {
        return Err(Error::Config(format!(
            "now/delayed position counts differ: {n} vs {}",
            positions_delayed.len()
        )));
    }
    let d = positions_now[0].len();
    if positions_now.iter().chain(positions_delayed.iter()).any(|p| p.len() != d) {
        return Err(Error::Domain("position dimension mismatch".into()));
    }
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; n];
        let mut denom = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let w = psi.eval(euclidean_distance(&positions_delayed[k], &positions_now[i]))?;
            row[k] = w;
            denom += w;
        }
        for (k, entry) in row.iter_mut().enumerate() {
            if k != i {
                *entry /= denom;
            }
        }
        entries.push(row);
    }
    Ok(WeightMatrix { entries })
}

/// Right-hand side of the delay system:
/// dx_i/dt = v_i(t), dv_i/dt = sum_k phi_ik (v_k(t - tau) - v_i(t)).
pub fn rhs(
    now: &SystemState,
    delayed: &SystemState,
    psi: &InfluenceFunction,
) -> Result<(AgentVectors, AgentVectors)> {
    let n = now.n();
    let d = now.dim();
    if delayed.n() != n || delayed.dim() != d {
        return Err(Error::Domain(format!(
            "now/delayed shape mismatch: ({n}, {d}) vs ({}, {})",
            delayed.n(),
            delayed.dim()
        )));
    }
    let dx = now.velocities.clone();
    let mut dv = vec![vec![0.0; d]; n];
    for i in 0..n {
        let mut numer = vec![0.0; d];
        let mut denom = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let w = psi.eval(euclidean_distance(&delayed.positions[k], &now.positions[i]))?;
            denom += w;
            for c in 0..d {
                numer[c] += w * (delayed.velocities[k][c] - now.velocities[i][c]);
            }
        }
        for c in 0..d {
            dv[i][c] = numer[c] / denom;
        }
    }
    Ok((dx, dv))
}

/// The N = 3, tau = 0 alternative: every agent puts weight at least 1/2 on
/// its nearer neighbor. True for any configuration and any admissible psi.
pub fn nearest_neighbor_weight_bound(positions: &AgentVectors, psi: &InfluenceFunction) -> Result<bool> {
    if positions.len() != 3 {
        return Err(Error::Config(format!(
            "the strong-neighbor bound is specific to N = 3, got N = {}",
            positions.len()
        )));
    }
    let weights = communication_weights(positions, positions, psi)?;
    Ok(weights
        .entries()
        .iter()
        .all(|row| row.iter().cloned().fold(0.0, f64::max) >= 0.5))
}
