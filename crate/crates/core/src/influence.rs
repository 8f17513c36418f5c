//! Influence functions: bounded, positive, nonincreasing, Lipschitz kernels
//! with psi(0) = 1, plus their tail integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, QuadratureConfig};

/// The kernel families understood by the toolkit. This is also the wire
/// format used in scenario configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InfluenceFamily {
    /// psi(s) = exp(-s)
    Exponential,
    /// psi(s) = (1 + s^2)^(-beta); the unit-prefactor Cucker-Smale rate.
    #[serde(rename = "cucker_smale")]
    CuckerSmaleRate { beta: f64 },
    /// psi(s) = 1 (heavy tail; unconditional regime)
    Constant,
    /// Piecewise-linear interpolation of tabulated values, extended flat
    /// past the last grid point.
    #[serde(rename = "tabulated")]
    TabulatedMonotone { grid: Vec<f64>, values: Vec<f64> },
}

/// A validated influence function together with its derived bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "InfluenceFamily", into = "InfluenceFamily")]
pub struct InfluenceFunction {
    family: InfluenceFamily,
    lipschitz_bound: f64,
    sup_bound: f64,
}

impl TryFrom<InfluenceFamily> for InfluenceFunction {
    type Error = Error;
    fn try_from(family: InfluenceFamily) -> Result<Self> {
        InfluenceFunction::from_family(family)
    }
}

impl From<InfluenceFunction> for InfluenceFamily {
    fn from(f: InfluenceFunction) -> InfluenceFamily {
        f.family
    }
}

/// How a tail integral value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Analytic,
    AdaptiveQuadrature,
}

/// The value of an integral of psi over [a, infinity); may be infinite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailIntegral {
    pub value: f64,
    pub method: TailMethod,
}

impl InfluenceFunction {
    pub fn exponential() -> Self {
        InfluenceFunction {
            family: InfluenceFamily::Exponential,
            lipschitz_bound: 1.0,
            sup_bound: 1.0,
        }
    }

    pub fn constant() -> Self {
        InfluenceFunction {
            family: InfluenceFamily::Constant,
            lipschitz_bound: 0.0,
            sup_bound: 1.0,
        }
    }

    /// psi(s) = (1 + s^2)^(-beta), beta > 0.
    pub fn cucker_smale(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "cucker_smale rate requires beta > 0, got {beta}"
            )));
        }
        // |psi'| is maximal at s* = 1/sqrt(2 beta + 1).
        let s_star = (2.0 * beta + 1.0).sqrt().recip();
        let lip = 2.0 * beta * s_star * (1.0 + s_star * s_star).powf(-(beta + 1.0));
        Ok(InfluenceFunction {
            family: InfluenceFamily::CuckerSmaleRate { beta },
            lipschitz_bound: lip,
            sup_bound: 1.0,
        })
    }

    /// Tabulated kernel. Construction checks structure only (sorted grid
    /// starting at 0, matching lengths, finite positive values); the
    /// Assumption-style properties (monotonicity, psi(0) = 1) are checked by
    /// [`InfluenceFunction::validate_on_grid`] so that deliberately broken
    /// tables can be constructed and reported on.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::Config(format!(
                "tabulated kernel needs equal, nonempty grid/value lengths (got {} / {})",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::Config(format!(
                "tabulated grid must start at 0, got {}",
                grid[0]
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated grid must be strictly increasing".into()));
        }
        if grid.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Config("tabulated grid/values must be finite".into()));
        }
        if values.iter().any(|&v| v <= 0.0) {
            return Err(Error::Config("tabulated values must be positive".into()));
        }
        let lip = grid
            .windows(2)
            .zip(values.windows(2))
            .map(|(g, v)| ((v[1] - v[0]) / (g[1] - g[0])).abs())
            .fold(0.0f64, f64::max);
        let sup = values.iter().cloned().fold(f64::MIN, f64::max);
        Ok(InfluenceFunction {
            family: InfluenceFamily::TabulatedMonotone { grid, values },
            lipschitz_bound: lip,
            sup_bound: sup,
        })
    }

    pub fn from_family(family: InfluenceFamily) -> Result<Self> {
        match family {
            InfluenceFamily::Exponential => Ok(Self::exponential()),
            InfluenceFamily::Constant => Ok(Self::constant()),
            InfluenceFamily::CuckerSmaleRate { beta } => Self::cucker_smale(beta),
            InfluenceFamily::TabulatedMonotone { grid, values } => Self::tabulated(grid, values),
        }
    }

    pub fn family(&self) -> &InfluenceFamily {
        &self.family
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Kernel value without the underflow clamp.
    fn eval_raw(&self, s: f64) -> f64 {
        match &self.family {
            InfluenceFamily::Exponential => (-s).exp(),
            InfluenceFamily::Constant => 1.0,
            InfluenceFamily::CuckerSmaleRate { beta } => (1.0 + s * s).powf(-beta),
            InfluenceFamily::TabulatedMonotone { grid, values } => {
                let last = *grid.last().unwrap();
                if s >= last {
                    return *values.last().unwrap();
                }
                // grid is sorted; find the segment containing s
                let i = match grid.binary_search_by(|g| g.partial_cmp(&s).unwrap()) {
                    Ok(i) => return values[i],
                    Err(i) => i, // s < grid[i], s > grid[i-1]
                };
                let (g0, g1) = (grid[i - 1], grid[i]);
                let w = (s - g0) / (g1 - g0);
                values[i - 1] * (1.0 - w) + values[i] * w
            }
        }
    }

    /// Evaluate psi(s). Negative s is a domain error; results are clamped
    /// below at the smallest positive normal so normalized weights never
    /// divide by zero at extreme separations.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("psi argument must be >= 0, got {s}")));
        }
        Ok(self.eval_raw(s).max(f64::MIN_POSITIVE))
    }

    /// Whether the tail integral over [a, infinity) diverges.
    fn tail_is_infinite(&self) -> bool {
        match &self.family {
            InfluenceFamily::Exponential => false,
            InfluenceFamily::Constant => true,
            InfluenceFamily::CuckerSmaleRate { beta } => *beta <= 0.5,
            // flat extension at a positive value
            InfluenceFamily::TabulatedMonotone { .. } => true,
        }
    }

    /// Tail of the Cucker-Smale kernel past R via the expansion
    /// (1+s^2)^(-b) = s^(-2b) (1 + s^(-2))^(-b); the first omitted term is
    /// of order R^(-2*terms) relative.
    fn cs_remainder(beta: f64, r: f64) -> f64 {
        let mut coeff = 1.0;
        let mut sum = 0.0;
        for k in 0..5 {
            let kf = k as f64;
            if k > 0 {
                coeff *= -(beta + kf - 1.0) / kf;
            }
            sum += coeff * r.powf(1.0 - 2.0 * beta - 2.0 * kf) / (2.0 * beta + 2.0 * kf - 1.0);
        }
        sum
    }

    /// Integral of psi over [a, infinity) with exact tails for 1/(1+s^2)^n.
    fn tail_analytic(&self, a: f64) -> Option<f64> {
        match &self.family {
            InfluenceFamily::Exponential => Some((-a).exp()),
            InfluenceFamily::Constant => Some(f64::INFINITY),
            InfluenceFamily::TabulatedMonotone { .. } => Some(f64::INFINITY),
            InfluenceFamily::CuckerSmaleRate { beta } => {
                if *beta <= 0.5 {
                    return Some(f64::INFINITY);
                }
                let n = beta.round();
                if (beta - n).abs() > 1e-12 {
                    return None;
                }
                // I_n(a) = (2n-3)/(2n-2) I_{n-1}(a) - a / ((2n-2)(1+a^2)^(n-1))
                let mut tail = std::f64::consts::FRAC_PI_2 - a.atan();
                let mut m = 1.0;
                while m < n - 0.5 {
                    let next = m + 1.0;
                    tail = (2.0 * next - 3.0) / (2.0 * next - 2.0) * tail
                        - a / ((2.0 * next - 2.0) * (1.0 + a * a).powf(next - 1.0));
                    m = next;
                }
                Some(tail)
            }
        }
    }

    /// tail_integral: integral of psi over [a, infinity). Analytic where a
    /// closed form exists (Exponential, integer-exponent Cucker-Smale,
    /// divergent families); adaptive quadrature over
    /// [a, a + truncation_radius] plus a decay remainder otherwise.
    pub fn tail_integral(&self, a: f64, cfg: &QuadratureConfig) -> Result<TailIntegral> {
        if !(a >= 0.0) {
            return Err(Error::Domain(format!("tail lower limit must be >= 0, got {a}")));
        }
        if self.tail_is_infinite() {
            return Ok(TailIntegral {
                value: f64::INFINITY,
                method: TailMethod::Analytic,
            });
        }
        if !cfg.force_numeric {
            if let Some(v) = self.tail_analytic(a) {
                return Ok(TailIntegral {
                    value: v,
                    method: TailMethod::Analytic,
                });
            }
        }
        let r = a + cfg.truncation_radius;
        let window = integrate_adaptive(&|s| self.eval_raw(s), a, r, cfg.abs_tol)?;
        let remainder = match &self.family {
            InfluenceFamily::Exponential => (-r).exp(),
            InfluenceFamily::CuckerSmaleRate { beta } => Self::cs_remainder(*beta, r),
            _ => unreachable!("divergent families handled above"),
        };
        Ok(TailIntegral {
            value: window + remainder,
            method: TailMethod::AdaptiveQuadrature,
        })
    }

    /// Finite integral of psi over [a, b] (signed when b < a). Used by the
    /// certificate's d_star search and the Lyapunov functional, where the
    /// divergent-tail families still have finite segment integrals.
    pub fn integral_between(&self, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if !(a >= 0.0) || !(b >= 0.0) {
            return Err(Error::Domain(format!(
                "integral limits must be >= 0, got [{a}, {b}]"
            )));
        }
        if b < a {
            return Ok(-self.integral_between(b, a, cfg)?);
        }
        if !cfg.force_numeric {
            match &self.family {
                InfluenceFamily::Exponential => return Ok((-a).exp() - (-b).exp()),
                InfluenceFamily::Constant => return Ok(b - a),
                InfluenceFamily::CuckerSmaleRate { .. } => {
                    if let (Some(ta), Some(tb)) = (self.tail_analytic(a), self.tail_analytic(b)) {
                        if ta.is_finite() && tb.is_finite() {
                            return Ok(ta - tb);
                        }
                    }
                }
                InfluenceFamily::TabulatedMonotone { .. } => {
                    return Ok(self.tabulated_integral(a, b));
                }
            }
        }
        integrate_adaptive(&|s| self.eval_raw(s), a, b, cfg.abs_tol)
    }

    /// Exact integral of the piecewise-linear table (flat past the last knot).
    fn tabulated_integral(&self, a: f64, b: f64) -> f64 {
        let (grid, values) = match &self.family {
            InfluenceFamily::TabulatedMonotone { grid, values } => (grid, values),
            _ => unreachable!(),
        };
        let mut total = 0.0;
        // knots restricted to (a, b), plus the endpoints
        let mut prev_s = a;
        let mut prev_v = self.eval_raw(a);
        for (&g, &val) in grid.iter().zip(values.iter()) {
            if g <= a {
                continue;
            }
            if g >= b {
                break;
            }
            total += 0.5 * (prev_v + val) * (g - prev_s);
            prev_s = g;
            prev_v = val;
        }
        let end_v = self.eval_raw(b);
        total += 0.5 * (prev_v + end_v) * (b - prev_s);
        total
    }

    /// Check the Assumption-style properties on a grid and report every
    /// violation found. An empty report is a pass.
    pub fn validate_on_grid(&self, grid: &[f64]) -> ValidationReport {
        let mut violations = Vec::new();
        if grid.is_empty() {
            violations.push(Violation::EmptyGrid);
            return ValidationReport { violations };
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            violations.push(Violation::UnsortedGrid);
            return ValidationReport { violations };
        }
        let v0 = self.eval_raw(0.0);
        if (v0 - 1.0).abs() > 1e-12 {
            violations.push(Violation::UnitAtZero { value: v0 });
        }
        let mut prev: Option<(f64, f64)> = None;
        for &s in grid {
            if s < 0.0 {
                violations.push(Violation::NegativeGridPoint { s });
                continue;
            }
            let val = self.eval_raw(s);
            // Positivity of the data itself; builtin formulas are positive by
            // construction until underflow, which the eval clamp guards.
            if val <= 0.0 && matches!(self.family, InfluenceFamily::TabulatedMonotone { .. }) {
                violations.push(Violation::Positivity { s, value: val });
            }
            if let Some((ps, pv)) = prev {
                let slack = 1e-14 * pv.abs().max(1.0);
                if val > pv + slack {
                    violations.push(Violation::Monotonicity {
                        s_lo: ps,
                        s_hi: s,
                        value_lo: pv,
                        value_hi: val,
                    });
                }
                let gap = s - ps;
                if (val - pv).abs() > self.lipschitz_bound * gap * (1.0 + 1e-9) + 1e-12 {
                    violations.push(Violation::Lipschitz {
                        s_lo: ps,
                        s_hi: s,
                        slope: ((val - pv) / gap).abs(),
                        bound: self.lipschitz_bound,
                    });
                }
            }
            prev = Some((s, val));
        }
        ValidationReport { violations }
    }
}

/// A single property violation found on a validation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    EmptyGrid,
    UnsortedGrid,
    NegativeGridPoint { s: f64 },
    UnitAtZero { value: f64 },
    Positivity { s: f64, value: f64 },
    Monotonicity { s_lo: f64, s_hi: f64, value_lo: f64, value_hi: f64 },
    Lipschitz { s_lo: f64, s_hi: f64, slope: f64, bound: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}
