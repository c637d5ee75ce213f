//! Optimal execution schedules under stochastic price laws, with
//! transaction-cost attribution and a Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod error;
pub mod models;
pub mod sim;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use models::{MarketState, ModelParams};
pub use solver::{solve, Formulation, Horizon, PolicyTable, Schedule, SolverConfig};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
