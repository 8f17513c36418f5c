//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural problem with a configuration (sizes, ranges, missing fields).
    #[error("configuration error: {0}")]
    Config(String),

    /// Adaptive quadrature exhausted its refinement budget. The partial value
    /// is the best estimate accumulated so far.
    #[error("quadrature did not converge within budget (partial value {partial}, error estimate {error_estimate})")]
    QuadratureNonConvergence { partial: f64, error_estimate: f64 },

    /// A non-finite component appeared during time integration.
    #[error("integration blow-up: non-finite state at t = {t} (last valid t = {last_valid_t})")]
    BlowUp { t: f64, last_valid_t: f64 },

    /// A query time fell outside the covered interval.
    #[error("time {t} outside covered range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// The operation does not support this input shape (e.g. unequal cloud sizes).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
