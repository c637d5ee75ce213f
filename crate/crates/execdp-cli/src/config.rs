//! Run configuration for `solve` and `simulate`.

use execdp::models::{MarketState, ModelParams};
use execdp::solver::{Formulation, Horizon, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub horizon: Horizon,
    #[serde(default)]
    pub formulation: Formulation,
    pub initial_state: MarketState,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub n_paths: usize,
    pub seed: u64,
    pub policy: PolicyChoice,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { n_paths: 10_000, seed: 0, policy: PolicyChoice::Optimal }
    }
}

/// Which schedule `simulate` executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChoice {
    /// Solve first, then follow the state-contingent policy table.
    Optimal,
    EqualSplit,
    Fixed { trades: Vec<f64> },
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { String::new() } else { format!(" at `{path}`") };
        CliError::input(format!("{what}{at}: {}", e.inner()))
    })
}

fn prefixed(prefix: &str, e: execdp::Error) -> execdp::Error {
    match e {
        execdp::Error::InvalidParam { field, reason } => {
            execdp::Error::InvalidParam { field: format!("{prefix}.{field}"), reason }
        }
        e => e,
    }
}

impl RunConfig {
    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        parse_json(bytes, "config")
    }

    /// Checks for solving: noise scales must be strictly positive.
    pub fn validate_for_solve(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| prefixed("model", e))?;
        self.validate_common()
    }

    /// Checks for simulation: zero noise is allowed.
    pub fn validate_for_simulation(&self) -> Result<(), CliError> {
        self.model.validate_for_simulation().map_err(|e| prefixed("model", e))?;
        if self.simulation.n_paths == 0 {
            return Err(execdp::Error::invalid("simulation.n_paths", "must be at least 1").into());
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<(), CliError> {
        self.horizon.validate()?;
        self.solver.validate().map_err(|e| prefixed("solver", e))?;
        if !(self.initial_state.price.is_finite() && self.initial_state.aux.is_finite()) {
            return Err(execdp::Error::invalid("initial_state", "price and aux must be finite").into());
        }
        Ok(())
    }
}
