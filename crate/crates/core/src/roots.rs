//! Roots of the two-particle characteristic equation
//! lambda = -exp(-lambda tau) - 1.
//!
//! Real roots are located by a sign scan plus bisection; complex roots by
//! damped Newton from a grid of imaginary-part guesses near odd multiples of
//! pi / (2 tau). All roots have nonpositive real part.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CharacteristicRoot {
    /// Real part (always <= 0).
    pub mu: f64,
    /// Imaginary part, reported nonnegative (roots come in conjugate pairs).
    pub sigma: f64,
    /// |lambda + exp(-lambda tau) + 1| at the returned root.
    pub residual: f64,
}

/// The requested roots sorted by descending real part; `complete` is false
/// when fewer than `count` distinct roots converged from the guess grid.
#[derive(Debug, Clone, Serialize)]
pub struct RootSet {
    pub roots: Vec<CharacteristicRoot>,
    pub complete: bool,
}

fn map(lambda: Complex64, tau: f64) -> Complex64 {
    lambda + (-lambda * tau).exp() + 1.0
}

fn map_derivative(lambda: Complex64, tau: f64) -> Complex64 {
    1.0 - tau * (-lambda * tau).exp()
}

/// Damped Newton iteration; returns a converged root or None.
fn newton(mut lambda: Complex64, tau: f64) -> Option<Complex64> {
    let mut value = map(lambda, tau);
    for _ in 0..200 {
        if value.norm() <= ROOT_RESIDUAL_TOL * 0.1 {
            return Some(lambda);
        }
        let deriv = map_derivative(lambda, tau);
        if deriv.norm() < 1e-300 {
            return None;
        }
        let full_step = value / deriv;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = lambda - damping * full_step;
            // keep the iteration away from overflow territory of exp(-mu tau)
            if candidate.re * tau < -600.0 {
                damping *= 0.5;
                continue;
            }
            let cand_value = map(candidate, tau);
            if cand_value.norm() < value.norm() {
                lambda = candidate;
                value = cand_value;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if value.norm() <= ROOT_RESIDUAL_TOL {
        Some(lambda)
    } else {
        None
    }
}

/// Real roots of mu + 1 + exp(-mu tau) = 0 via sign scan and bisection.
fn real_roots(tau: f64) -> Vec<f64> {
    let g = |mu: f64| {
        let e = -mu * tau;
        if e > 600.0 {
            f64::INFINITY
        } else {
            mu + 1.0 + e.exp()
        }
    };
    let (lo, hi, steps) = (-60.0f64, 5.0f64, 2600usize);
    let h = (hi - lo) / steps as f64;
    let mut found = Vec::new();
    let mut prev = g(lo);
    for k in 1..=steps {
        let x = lo + h * k as f64;
        let cur = g(x);
        if prev.is_finite() && cur.is_finite() && prev * cur <= 0.0 && prev != cur {
            let (mut a, mut b) = (x - h, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if g(a) * g(mid) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a < 1e-16 {
                    break;
                }
            }
            found.push(0.5 * (a + b));
        }
        prev = cur;
    }
    found
}

/// Find `count` characteristic roots for delay `tau`.
pub fn characteristic_roots(tau: f64, count: usize) -> Result<RootSet> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if count == 0 {
        return Ok(RootSet { roots: Vec::new(), complete: true });
    }

    let mut found: Vec<Complex64> = Vec::new();
    let mut push = |root: Complex64| {
        let root = Complex64::new(root.re, root.im.abs());
        let duplicate = found
            .iter()
            .any(|r| (r.re - root.re).abs() < 1e-9 && (r.im - root.im).abs() < 1e-9);
        if !duplicate && root.re <= 1e-9 {
            found.push(root);
        }
    };

    for mu in real_roots(tau) {
        if let Some(root) = newton(Complex64::new(mu, 0.0), tau) {
            push(root);
        } else {
            // bisection alone already meets the residual tolerance
            push(Complex64::new(mu, 0.0));
        }
    }
    for k in 0..(count + 5) {
        let odd = (2 * k + 1) as f64;
        for sigma0 in [
            odd * std::f64::consts::FRAC_PI_2 / tau,
            odd * std::f64::consts::PI / tau,
        ] {
            // a near guess and one from the asymptotic balance
            // exp(-mu tau) ~ sigma of the high-frequency branches
            for mu0 in [-1.0, -(1.0 + sigma0).ln() / tau] {
                if let Some(root) = newton(Complex64::new(mu0, sigma0), tau) {
                    push(root);
                }
            }
        }
    }

    let mut roots: Vec<CharacteristicRoot> = found
        .into_iter()
        .map(|r| CharacteristicRoot {
            mu: r.re,
            sigma: r.im,
            residual: map(r, tau).norm(),
        })
        .collect();
    roots.sort_by(|a, b| b.mu.partial_cmp(&a.mu).unwrap());
    let complete = roots.len() >= count;
    roots.truncate(count);
    Ok(RootSet { roots, complete })
}
