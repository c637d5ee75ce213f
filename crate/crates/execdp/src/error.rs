use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("conditioning event has zero probability: {0}")]
    EmptyEvent(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },
    #[error("liquidity violation: trade {trade} exceeds volume {volume}")]
    LiquidityViolation { trade: f64, volume: f64 },
    #[error("infeasible liquidity at stage {stage}: {reason}")]
    InfeasibleLiquidity { stage: usize, reason: String },
    #[error("root finder did not converge on [{lo}, {hi}] (residual {residual})")]
    NoConvergence { lo: f64, hi: f64, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unbalanced interval {interval}: bought {bought}, sold {sold}")]
    Unbalanced { interval: usize, bought: f64, sold: f64 },
    #[error("stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },
}

impl Error {
    pub fn at_stage(self, stage: usize) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { field: field.to_string(), reason: reason.into() }
    }

    /// Innermost error with stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
