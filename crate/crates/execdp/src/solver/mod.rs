//! Backward-induction solvers and the schedule/policy data model.

mod arith;
mod gbm;
pub mod interp;
mod liquidity;
pub mod optimize;
mod regression;

pub use arith::{
    approximate_recursion, ar1_closed_form_value, ar1_quadrature_value, benchmark_prop4_foc, complex_foc,
    solve_ar1_complex, solve_ar1_simple, solve_benchmark_complex, solve_benchmark_simple, solve_last_complex_stage,
    ArithKernel, FocMethod, FocSolution, RecursionModel,
};
pub use gbm::{gbm_stage_cost, gbm_terminal_value, solve_gbm_simple};
pub use liquidity::{
    liquidity_search_interval, liquidity_stage_cost, liquidity_terminal_value, liquidity_t_minus_1_objective,
    solve_liquidity,
};
pub use regression::FeatureMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{MarketState, ModelParams};
use interp::MonotoneCubic;

/// Simple formulation charges adverse steps on executed shares, complex on
/// the residual program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Simple,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub periods: usize,
    pub total_shares: f64,
}

impl Horizon {
    pub fn new(periods: usize, total_shares: f64) -> Result<Self> {
        let h = Self { periods, total_shares };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::invalid("horizon.periods", "must be at least 1"));
        }
        if !(self.total_shares > 0.0 && self.total_shares.is_finite()) {
            return Err(Error::invalid(
                "horizon.total_shares",
                format!("must be positive and finite, got {}", self.total_shares),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// S_1..S_T.
    pub trades: Vec<f64>,
    /// W_1..W_{T+1}.
    pub residuals: Vec<f64>,
}

impl Schedule {
    /// Builds residuals from trades; the last trade absorbs rounding so that
    /// W_{T+1} is exactly zero.
    pub fn from_trades(total: f64, trades: &[f64]) -> Self {
        let mut trades = trades.to_vec();
        let mut residuals = Vec::with_capacity(trades.len() + 1);
        let mut w = total;
        let last = trades.len() - 1;
        for (i, s) in trades.iter_mut().enumerate() {
            residuals.push(w);
            if i == last {
                *s = w;
            }
            w -= *s;
        }
        residuals.push(0.0);
        Self { trades, residuals }
    }

    pub fn equal_split(h: &Horizon) -> Self {
        let s = h.total_shares / h.periods as f64;
        Self::from_trades(h.total_shares, &vec![s; h.periods])
    }

    pub fn periods(&self) -> usize {
        self.trades.len()
    }

    pub fn validate(&self, total: f64) -> Result<()> {
        let t = self.trades.len();
        if t == 0 || self.residuals.len() != t + 1 {
            return Err(Error::Validation("schedule needs T trades and T+1 residuals".into()));
        }
        let sum: f64 = self.trades.iter().sum();
        if (sum - total).abs() > 1e-9 * total.abs().max(1.0) {
            return Err(Error::Validation(format!("trades sum to {sum}, expected {total}")));
        }
        if self.residuals[0] != total || self.residuals[t] != 0.0 {
            return Err(Error::Validation("residuals must start at the total and end at zero".into()));
        }
        for i in 0..t {
            if self.trades[i] < -1e-12 {
                return Err(Error::Validation(format!("trade {} is negative: {}", i + 1, self.trades[i])));
            }
            let d = self.residuals[i] - self.residuals[i + 1] - self.trades[i];
            if d.abs() > 1e-9 * total.abs().max(1.0) {
                return Err(Error::Validation(format!("residual identity fails at t={}", i + 1)));
            }
        }
        Ok(())
    }
}

/// Decision rule for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StagePolicy {
    /// Execute everything that remains.
    Forced,
    /// S = fraction · W.
    ClosedLinear { fraction: f64 },
    /// S/W interpolated in W.
    Numerical { w_grid: Vec<f64>, fractions: Vec<f64> },
    /// S/W interpolated in W and, linearly, in the frozen drift α = coef · X.
    NumericalAlpha { alpha_coef: f64, alpha_grid: Vec<f64>, w_grid: Vec<f64>, fractions: Vec<Vec<f64>> },
    /// S/W as a quadratic surface in the standardized state, one fit per W node.
    Regression { w_grid: Vec<f64>, features: FeatureMap, coefficients: Vec<[f64; 6]> },
}

impl StagePolicy {
    pub fn compile(&self) -> CompiledStage {
        match self {
            StagePolicy::Forced => CompiledStage::Forced,
            StagePolicy::ClosedLinear { fraction } => CompiledStage::Linear(*fraction),
            StagePolicy::Numerical { w_grid, fractions } => {
                CompiledStage::Numerical(MonotoneCubic::new(w_grid.clone(), fractions.clone()))
            }
            StagePolicy::NumericalAlpha { alpha_coef, alpha_grid, w_grid, fractions } => CompiledStage::Alpha {
                coef: *alpha_coef,
                grid: alpha_grid.clone(),
                rows: fractions.iter().map(|f| MonotoneCubic::new(w_grid.clone(), f.clone())).collect(),
            },
            StagePolicy::Regression { w_grid, features, coefficients } => CompiledStage::Regression {
                w_grid: w_grid.clone(),
                features: *features,
                coefficients: coefficients.clone(),
            },
        }
    }

    /// Trade for residual `w` in `state`, clipped to [0, w].
    pub fn trade(&self, w: f64, state: &MarketState) -> f64 {
        self.compile().trade(w, state)
    }
}

/// Stage policy with interpolants prebuilt, for repeated evaluation.
#[derive(Debug, Clone)]
pub enum CompiledStage {
    Forced,
    Linear(f64),
    Numerical(MonotoneCubic),
    Alpha { coef: f64, grid: Vec<f64>, rows: Vec<MonotoneCubic> },
    Regression { w_grid: Vec<f64>, features: FeatureMap, coefficients: Vec<[f64; 6]> },
}

impl CompiledStage {
    pub fn fraction(&self, w: f64, state: &MarketState) -> f64 {
        match self {
            CompiledStage::Forced => 1.0,
            CompiledStage::Linear(f) => *f,
            CompiledStage::Numerical(m) => m.eval(w),
            CompiledStage::Alpha { coef, grid, rows } => {
                let alpha = coef * state.aux;
                let n = grid.len();
                if n == 1 || alpha <= grid[0] {
                    rows[0].eval(w)
                } else if alpha >= grid[n - 1] {
                    rows[n - 1].eval(w)
                } else {
                    let i = grid.partition_point(|a| *a <= alpha) - 1;
                    let t = (alpha - grid[i]) / (grid[i + 1] - grid[i]);
                    (1.0 - t) * rows[i].eval(w) + t * rows[i + 1].eval(w)
                }
            }
            CompiledStage::Regression { w_grid, features, coefficients } => {
                let phi = features.basis(state);
                let at = |j: usize| coefficients[j].iter().zip(&phi).map(|(c, f)| c * f).sum::<f64>();
                let n = w_grid.len();
                if w <= w_grid[0] {
                    at(0)
                } else if w >= w_grid[n - 1] {
                    at(n - 1)
                } else {
                    let j = w_grid.partition_point(|x| *x <= w) - 1;
                    let t = (w - w_grid[j]) / (w_grid[j + 1] - w_grid[j]);
                    (1.0 - t) * at(j) + t * at(j + 1)
                }
            }
        }
    }

    pub fn trade(&self, w: f64, state: &MarketState) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        (self.fraction(w, state).clamp(0.0, 1.0) * w).clamp(0.0, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub model: String,
    pub formulation: Formulation,
    /// One entry per stage t = 1..T.
    pub stages: Vec<StagePolicy>,
    /// Per stage, (W, V(W)) samples.
    pub value_samples: Vec<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

impl PolicyTable {
    pub fn periods(&self) -> usize {
        self.stages.len()
    }

    /// Trade at stage `t` (1-based).
    pub fn trade(&self, t: usize, w: f64, state: &MarketState) -> f64 {
        self.stages[t - 1].trade(w, state)
    }

    pub fn compile(&self) -> Vec<CompiledStage> {
        self.stages.iter().map(StagePolicy::compile).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// W-grid size for the deterministic recursions.
    pub grid_nodes: usize,
    /// Lowest grid node as a fraction of the total.
    pub grid_lower_ratio: f64,
    /// Uniform scan points before golden refinement.
    pub scan_points: usize,
    /// Minimizer and root tolerance relative to W.
    pub xtol_rel: f64,
    pub root_max_iter: usize,
    /// Nodes in the frozen-drift grid for state-contingent AR(1) policies.
    pub alpha_nodes: usize,
    /// Gauss–Hermite order for last-but-one expectations.
    pub quadrature_order: usize,
    /// Gauss–Hermite order for expectations of regression surrogates.
    pub inner_quadrature_order: usize,
    /// Relative change tolerated when the quadrature order is doubled.
    pub resolution_tol: f64,
    /// Simulated states per W node for regression recursions.
    pub regression_samples: usize,
    /// W-grid size for regression recursions.
    pub regression_grid_nodes: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_nodes: 64,
            grid_lower_ratio: 1e-3,
            scan_points: 64,
            xtol_rel: 1e-10,
            root_max_iter: 200,
            alpha_nodes: 17,
            quadrature_order: 40,
            inner_quadrature_order: 12,
            resolution_tol: 1e-6,
            regression_samples: 256,
            regression_grid_nodes: 24,
            seed: 7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_nodes < 4 || self.regression_grid_nodes < 4 {
            return Err(Error::Config("W-grid needs at least 4 nodes".into()));
        }
        if !(self.grid_lower_ratio > 0.0 && self.grid_lower_ratio < 1.0) {
            return Err(Error::Config("grid_lower_ratio must lie in (0, 1)".into()));
        }
        if self.scan_points < 2 {
            return Err(Error::Config("scan_points must be at least 2".into()));
        }
        if !(self.xtol_rel > 0.0) {
            return Err(Error::Config("xtol_rel must be positive".into()));
        }
        for (name, n) in [("quadrature_order", self.quadrature_order), ("inner_quadrature_order", self.inner_quadrature_order)] {
            if n == 0 || 2 * n > 128 {
                return Err(Error::Config(format!("{name} must lie in 1..=64 so that doubling stays valid")));
            }
        }
        if self.regression_samples < 12 {
            return Err(Error::Config("regression_samples must be at least 12".into()));
        }
        if self.alpha_nodes == 0 {
            return Err(Error::Config("alpha_nodes must be positive".into()));
        }
        Ok(())
    }

    pub fn w_grid(&self, total: f64) -> Vec<f64> {
        interp::log_grid(total * self.grid_lower_ratio, total, self.grid_nodes)
    }
}

/// Dispatches to the solver matching the model variant.
pub fn solve(
    params: &ModelParams,
    formulation: Formulation,
    horizon: &Horizon,
    state: &MarketState,
    cfg: &SolverConfig,
) -> Result<(Schedule, PolicyTable)> {
    params.validate()?;
    horizon.validate()?;
    cfg.validate()?;
    match (params, formulation) {
        (ModelParams::Benchmark(p), Formulation::Simple) => solve_benchmark_simple(p, horizon, cfg),
        (ModelParams::Benchmark(p), Formulation::Complex) => solve_benchmark_complex(p, horizon, cfg),
        (ModelParams::Ar1Extra(p) | ModelParams::Spread(p), Formulation::Simple) => {
            solve_ar1_simple(p, horizon, state.aux, cfg).map(|r| relabel(r, params))
        }
        (ModelParams::Ar1Extra(p) | ModelParams::Spread(p), Formulation::Complex) => {
            solve_ar1_complex(p, horizon, state.aux, cfg).map(|r| relabel(r, params))
        }
        (ModelParams::LinearPercentage(p), Formulation::Simple) => solve_gbm_simple(p, horizon, state, cfg),
        (ModelParams::LinearPercentage(_), Formulation::Complex) => Err(Error::UnsupportedRegime(
            "the linear-percentage law is solved for the simple formulation only".into(),
        )),
        (ModelParams::Liquidity(p), f) => solve_liquidity(p, f, horizon, state, cfg),
    }
}

fn relabel(mut r: (Schedule, PolicyTable), params: &ModelParams) -> (Schedule, PolicyTable) {
    r.1.model = params.name().to_string();
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_invariants() {
        let s = Schedule::equal_split(&Horizon::new(4, 100.0).unwrap());
        assert_eq!(s.trades, vec![25.0; 4]);
        assert_eq!(s.residuals, vec![100.0, 75.0, 50.0, 25.0, 0.0]);
        s.validate(100.0).unwrap();
    }

    #[test]
    fn last_trade_absorbs_rounding() {
        let s = Schedule::equal_split(&Horizon::new(3, 1.0).unwrap());
        assert_eq!(*s.residuals.last().unwrap(), 0.0);
        s.validate(1.0).unwrap();
    }

    #[test]
    fn horizon_rejects_zero() {
        assert!(Horizon::new(0, 1.0).is_err());
        assert!(Horizon::new(1, -1.0).is_err());
    }

    #[test]
    fn config_rejects_tiny_grid() {
        let cfg = SolverConfig { grid_nodes: 2, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
