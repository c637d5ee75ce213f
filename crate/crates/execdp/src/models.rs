//! Laws of price motion and their one-step transitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkParams {
    pub theta: f64,
    pub sigma_eps: f64,
}

/// Arithmetic walk with an AR(1) auxiliary state entering the price linearly.
/// Used for both the private-information state and the spread state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Params {
    pub theta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
}

impl Ar1Params {
    /// Std of the combined one-step shock γη + ε.
    pub fn combined_sigma(&self) -> f64 {
        (self.gamma * self.gamma * self.sigma_eta * self.sigma_eta + self.sigma_eps * self.sigma_eps).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu_b: f64,
    pub sigma_b: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma_eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "LiquidityInput")]
pub struct LiquidityParams {
    pub alpha: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
    /// θ + γ, derived at construction.
    pub beta: f64,
}

#[derive(Deserialize)]
struct LiquidityInput {
    alpha: f64,
    theta: f64,
    gamma: f64,
    rho: f64,
    sigma_eps: f64,
    sigma_eta: f64,
}

impl From<LiquidityInput> for LiquidityParams {
    fn from(v: LiquidityInput) -> Self {
        LiquidityParams::new(v.alpha, v.theta, v.gamma, v.rho, v.sigma_eps, v.sigma_eta)
    }
}

impl LiquidityParams {
    pub fn new(alpha: f64, theta: f64, gamma: f64, rho: f64, sigma_eps: f64, sigma_eta: f64) -> Self {
        Self { alpha, theta, gamma, rho, sigma_eps, sigma_eta, beta: theta + gamma }
    }

    /// Std of the one-step price change at price level `p`.
    pub fn shock_sigma(&self, p: f64) -> f64 {
        (self.gamma * self.gamma * p * p * self.sigma_eta * self.sigma_eta + self.sigma_eps * self.sigma_eps).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Benchmark(BenchmarkParams),
    Ar1Extra(Ar1Params),
    LinearPercentage(GbmParams),
    Liquidity(LiquidityParams),
    Spread(Ar1Params),
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be nonnegative and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

fn ar_coefficient(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (-1, 1), got {v}")))
    }
}

impl ModelParams {
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::Benchmark(_) => "benchmark",
            ModelParams::Ar1Extra(_) => "ar1_extra",
            ModelParams::LinearPercentage(_) => "linear_percentage",
            ModelParams::Liquidity(_) => "liquidity",
            ModelParams::Spread(_) => "spread",
        }
    }

    /// Full validation: every noise scale strictly positive.
    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// Validation for simulation, where zero noise scales are allowed.
    pub fn validate_for_simulation(&self) -> Result<()> {
        self.check(true)
    }

    fn check(&self, allow_zero_noise: bool) -> Result<()> {
        let sigma = |field: &str, v: f64| {
            if allow_zero_noise {
                non_negative(field, v)
            } else {
                positive(field, v)
            }
        };
        match *self {
            ModelParams::Benchmark(p) => {
                positive("theta", p.theta)?;
                sigma("sigma_eps", p.sigma_eps)
            }
            ModelParams::Ar1Extra(p) | ModelParams::Spread(p) => {
                positive("theta", p.theta)?;
                non_negative("gamma", p.gamma)?;
                ar_coefficient("rho", p.rho)?;
                sigma("sigma_eps", p.sigma_eps)?;
                sigma("sigma_eta", p.sigma_eta)
            }
            ModelParams::LinearPercentage(p) => {
                finite("mu_b", p.mu_b)?;
                sigma("sigma_b", p.sigma_b)?;
                positive("theta", p.theta)?;
                non_negative("gamma", p.gamma)?;
                ar_coefficient("rho", p.rho)?;
                sigma("sigma_eta", p.sigma_eta)
            }
            ModelParams::Liquidity(p) => {
                finite("alpha", p.alpha)?;
                positive("theta", p.theta)?;
                positive("gamma", p.gamma)?;
                ar_coefficient("rho", p.rho)?;
                sigma("sigma_eps", p.sigma_eps)?;
                sigma("sigma_eta", p.sigma_eta)?;
                if p.beta != p.theta + p.gamma {
                    return Err(Error::invalid("beta", "must equal theta + gamma"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "MarketStateInput")]
pub struct MarketState {
    pub price: f64,
    /// No-impact price; only meaningful for the linear-percentage law.
    pub no_impact_price: f64,
    /// Auxiliary AR(1) state: information, volume, or spread.
    pub aux: f64,
    pub time_index: usize,
}

/// Omitted no-impact price defaults to the observed price.
#[derive(Deserialize)]
struct MarketStateInput {
    price: f64,
    #[serde(default)]
    no_impact_price: Option<f64>,
    #[serde(default)]
    aux: f64,
    #[serde(default)]
    time_index: usize,
}

impl From<MarketStateInput> for MarketState {
    fn from(v: MarketStateInput) -> Self {
        Self { price: v.price, no_impact_price: v.no_impact_price.unwrap_or(v.price), aux: v.aux, time_index: v.time_index }
    }
}

impl MarketState {
    pub fn new(price: f64, aux: f64) -> Self {
        Self { price, no_impact_price: price, aux, time_index: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: MarketState,
    /// Sampled volume was negative and clamped at zero.
    pub volume_clamped: bool,
    /// Price left the positive half-line.
    pub degenerate_price: bool,
}

/// One transition of the law of motion. `noise` holds standard-normal draws:
/// the first drives the price shock (ε, or B for the geometric walk), the second η.
pub fn step(params: &ModelParams, state: &MarketState, trade: f64, noise: (f64, f64)) -> Result<MarketState> {
    step_with_flags(params, state, trade, noise).map(|o| o.state)
}

pub fn step_with_flags(
    params: &ModelParams,
    state: &MarketState,
    trade: f64,
    noise: (f64, f64),
) -> Result<StepOutcome> {
    if !(trade >= 0.0) {
        return Err(Error::invalid("trade", format!("must be nonnegative, got {trade}")));
    }
    let (z_eps, z_eta) = noise;
    let mut next = *state;
    next.time_index = state.time_index + 1;
    let mut volume_clamped = false;
    let mut degenerate_price = false;
    match *params {
        ModelParams::Benchmark(p) => {
            next.price = state.price + p.theta * trade + p.sigma_eps * z_eps;
        }
        ModelParams::Ar1Extra(p) | ModelParams::Spread(p) => {
            next.aux = p.rho * state.aux + p.sigma_eta * z_eta;
            next.price = state.price + p.theta * trade + p.gamma * next.aux + p.sigma_eps * z_eps;
        }
        ModelParams::LinearPercentage(p) => {
            let b = p.mu_b + p.sigma_b * z_eps;
            next.no_impact_price = state.no_impact_price * b.exp();
            next.aux = p.rho * state.aux + p.sigma_eta * z_eta;
            let delta = (p.theta * trade + p.gamma * next.aux) * next.no_impact_price;
            next.price = next.no_impact_price + delta;
        }
        ModelParams::Liquidity(p) => {
            let mut volume = p.rho * state.aux + p.sigma_eta * z_eta;
            if volume < 0.0 {
                volume = 0.0;
                volume_clamped = true;
            }
            if trade > volume {
                return Err(Error::LiquidityViolation { trade, volume });
            }
            next.aux = volume;
            let p0 = state.price;
            next.price = p0 * (p.alpha + 1.0 + p.beta * trade - p.gamma * volume) + p.sigma_eps * z_eps;
            if next.price <= 0.0 {
                degenerate_price = true;
                tracing::warn!(price = next.price, "liquidity path reached a nonpositive price");
            }
        }
    }
    Ok(StepOutcome { state: next, volume_clamped, degenerate_price })
}

/// Whether the last-but-one benchmark objective is guaranteed convex: θ > 3σ_ε/4.
pub fn convexity_check(params: &ModelParams) -> Result<bool> {
    match params {
        ModelParams::Benchmark(p) => Ok(p.theta > 0.75 * p.sigma_eps),
        other => Err(Error::UnsupportedRegime(format!(
            "convexity check applies to the benchmark law only, got {}",
            other.name()
        ))),
    }
}
