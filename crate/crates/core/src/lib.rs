//! Simulation and analysis toolkit for the delayed Cucker-Smale system with
//! normalized communication weights.
//!
//! The crate integrates the delay system by the method of steps, evaluates
//! the sufficient flocking condition and its certified decay rate, checks
//! the supporting lemmas as runtime invariants, and measures the mean-field
//! behavior of the particle flow through Wasserstein-1 distances between
//! empirical measures.

pub mod assignment;
pub mod diagnostics;
pub mod error;
pub mod influence;
pub mod integrator;
pub mod meanfield;
pub mod particles;
pub mod quadrature;
pub mod roots;
pub mod scenario;

pub use error::{Error, Result};
