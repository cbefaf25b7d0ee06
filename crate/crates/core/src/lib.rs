//! Unitarily invariant matrix norms, minimax rates and Monte Carlo risk
//! experiments for matrix estimation problems.

pub mod error;
pub mod estimators;
pub mod gauges;
pub mod geometry;
pub mod harness;
pub mod matcore;
pub mod models;

pub use error::{Error, Result};
