//! Seeded Monte Carlo: path simulation, policy evaluation, cost statistics.
//!
//! Path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, two
//! standard normals per stage (price shock first), so results do not depend
//! on how paths are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute, Fill, OrderContext, Side};
use crate::error::{Error, Result};
use crate::models::{step_with_flags, MarketState, ModelParams};
use crate::solver::{ArithKernel, CompiledStage, Formulation, Horizon, PolicyTable, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelParams,
    pub horizon: Horizon,
    pub n_paths: usize,
    pub seed: u64,
    pub initial_state: MarketState,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate_for_simulation()?;
        self.horizon.validate()?;
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be at least 1"));
        }
        if !self.initial_state.price.is_finite() {
            return Err(Error::invalid("initial_state.price", "must be finite"));
        }
        Ok(())
    }
}

/// What to execute: a fixed schedule or a state-contingent policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutionPolicy {
    Fixed(Schedule),
    Adaptive(PolicyTable),
}

impl ExecutionPolicy {
    pub fn periods(&self) -> usize {
        match self {
            ExecutionPolicy::Fixed(s) => s.periods(),
            ExecutionPolicy::Adaptive(p) => p.periods(),
        }
    }
}

enum Runner<'a> {
    Fixed(&'a Schedule),
    Adaptive(Vec<CompiledStage>),
}

impl Runner<'_> {
    fn trade(&self, t: usize, w: f64, state: &MarketState) -> f64 {
        match self {
            Runner::Fixed(s) => s.trades[t - 1].min(w).max(0.0),
            Runner::Adaptive(stages) => {
                if t == stages.len() {
                    w
                } else {
                    stages[t - 1].trade(w, state)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Pairwise summation; fixed association for a given length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN, q05: f64::NAN, q25: f64::NAN, q50: f64::NAN, q75: f64::NAN, q95: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let std = if xs.len() > 1 { (pairwise_sum(&dev) / (n - 1.0)).sqrt() } else { 0.0 };
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            mean,
            std,
            q05: quantile(&s, 0.05),
            q25: quantile(&s, 0.25),
            q50: quantile(&s, 0.50),
            q75: quantile(&s, 0.75),
            q95: quantile(&s, 0.95),
        }
    }
}

/// Monte Carlo estimate of one stage's cost E[ΔP·q | ΔP > 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths with ΔP > 0.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path: usize,
    pub prices: Vec<f64>,
    pub trades: Vec<f64>,
    pub shortfall: f64,
    pub impact: f64,
    pub timing: f64,
    /// Side-adjusted return over the horizon (negative is adverse).
    pub momentum: f64,
    /// Coefficient of variation of P_0..P_T.
    pub cov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDistribution {
    pub formulation: Formulation,
    pub n_paths: usize,
    pub shortfall: Vec<f64>,
    pub impact: Vec<f64>,
    pub timing: Vec<f64>,
    pub shortfall_summary: Summary,
    pub impact_summary: Summary,
    pub timing_summary: Summary,
    /// Per-stage estimates and their sum: the simulated stage-1 objective.
    pub stage_objective: Vec<StageEstimate>,
    pub objective: f64,
    pub objective_std_error: f64,
    /// Paths dropped for breaching the liquidity constraint.
    pub excluded_paths: usize,
    pub clamped_volume_paths: usize,
    pub nonpositive_price_paths: usize,
    pub paths: Vec<PathRecord>,
}

enum PathResult {
    Done { record: PathRecord, clamped: bool, degenerate: bool },
    Infeasible,
}

fn simulate_path(cfg: &SimConfig, runner: &Runner, f: Formulation, i: usize) -> Result<PathResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let t_max = cfg.horizon.periods;
    let mut state = cfg.initial_state;
    state.time_index = 0;
    let mut prices = Vec::with_capacity(t_max + 1);
    prices.push(state.price);
    let mut trades = Vec::with_capacity(t_max);
    let mut w = cfg.horizon.total_shares;
    let (mut clamped, mut degenerate) = (false, false);
    for t in 1..=t_max {
        let s = if t == t_max { w } else { runner.trade(t, w, &state) };
        let z_eps: f64 = StandardNormal.sample(&mut rng);
        let z_eta: f64 = StandardNormal.sample(&mut rng);
        let out = match step_with_flags(&cfg.model, &state, s, (z_eps, z_eta)) {
            Ok(o) => o,
            Err(Error::LiquidityViolation { .. }) => return Ok(PathResult::Infeasible),
            Err(e) => return Err(e),
        };
        clamped |= out.volume_clamped;
        degenerate |= out.degenerate_price;
        state = out.state;
        prices.push(state.price);
        trades.push(s);
        w -= s;
    }
    let total = cfg.horizon.total_shares;
    let fills: Vec<Fill> = trades
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 0.0)
        .map(|(k, s)| Fill { t: k + 1, participant: "sim".into(), side: Side::Buy, qty: *s, price: prices[k + 1] })
        .collect();
    let ctx = OrderContext { arrival_price: prices[0], total_shares: total, horizon: t_max, price_path: prices.clone() };
    let (shortfall, impact, timing) = if prices.iter().all(|p| *p > 0.0) && !fills.is_empty() {
        let r = attribute(&ctx, &fills, f)?;
        (r.shortfall, r.impact, r.timing)
    } else {
        // Attribution needs positive prices; fall back to the raw sums.
        let sf: f64 = trades.iter().zip(&prices[1..]).map(|(s, p)| s * (p - prices[0])).sum();
        let mut w = total;
        let mut im = 0.0;
        for t in 1..=t_max {
            let up = (prices[t] - prices[t - 1]).max(0.0);
            im += up * if f == Formulation::Simple { trades[t - 1] } else { w };
            w -= trades[t - 1];
        }
        (sf, im, sf - im)
    };
    let momentum = -(prices[t_max] - prices[0]) / prices[0];
    let n = prices.len() as f64;
    let mean = prices.iter().sum::<f64>() / n;
    let var = prices.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let cov = if mean != 0.0 { var.sqrt() / mean.abs() } else { f64::INFINITY };
    Ok(PathResult::Done {
        record: PathRecord { path: i, prices, trades, shortfall, impact, timing, momentum, cov },
        clamped,
        degenerate,
    })
}

/// Simulates `cfg.n_paths` paths executing `policy` and attributes each one.
pub fn evaluate_policy(cfg: &SimConfig, policy: &ExecutionPolicy, f: Formulation) -> Result<CostDistribution> {
    cfg.validate()?;
    if policy.periods() != cfg.horizon.periods {
        return Err(Error::Validation(format!(
            "policy has {} stages but the horizon is {}",
            policy.periods(),
            cfg.horizon.periods
        )));
    }
    let runner = match policy {
        ExecutionPolicy::Fixed(s) => {
            s.validate(cfg.horizon.total_shares)?;
            Runner::Fixed(s)
        }
        ExecutionPolicy::Adaptive(p) => Runner::Adaptive(p.compile()),
    };
    let results: Vec<PathResult> =
        (0..cfg.n_paths).into_par_iter().map(|i| simulate_path(cfg, &runner, f, i)).collect::<Result<_>>()?;

    let mut paths = Vec::with_capacity(results.len());
    let (mut excluded, mut clamped_n, mut degenerate_n) = (0, 0, 0);
    for r in results {
        match r {
            PathResult::Done { record, clamped, degenerate } => {
                clamped_n += clamped as usize;
                degenerate_n += degenerate as usize;
                paths.push(record);
            }
            PathResult::Infeasible => excluded += 1,
        }
    }
    if excluded > 0 {
        tracing::warn!(excluded, "paths excluded for breaching the liquidity constraint");
    }
    let shortfall: Vec<f64> = paths.iter().map(|p| p.shortfall).collect();
    let impact: Vec<f64> = paths.iter().map(|p| p.impact).collect();
    let timing: Vec<f64> = paths.iter().map(|p| p.timing).collect();

    let t_max = cfg.horizon.periods;
    let mut stage_objective = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let hits: Vec<f64> = paths
            .iter()
            .filter_map(|p| {
                let dp = p.prices[t] - p.prices[t - 1];
                (dp > 0.0).then(|| {
                    let q = match f {
                        Formulation::Simple => p.trades[t - 1],
                        Formulation::Complex => cfg.horizon.total_shares - p.trades[..t - 1].iter().sum::<f64>(),
                    };
                    dp * q
                })
            })
            .collect();
        let s = Summary::of(&hits);
        let count = hits.len();
        stage_objective.push(StageEstimate {
            mean: if count > 0 { s.mean } else { 0.0 },
            std_error: if count > 1 { s.std / (count as f64).sqrt() } else { 0.0 },
            count,
        });
    }
    let objective = stage_objective.iter().map(|s| s.mean).sum();
    let objective_std_error = stage_objective.iter().map(|s| s.std_error * s.std_error).sum::<f64>().sqrt();

    Ok(CostDistribution {
        formulation: f,
        n_paths: paths.len(),
        shortfall_summary: Summary::of(&shortfall),
        impact_summary: Summary::of(&impact),
        timing_summary: Summary::of(&timing),
        shortfall,
        impact,
        timing,
        stage_objective,
        objective,
        objective_std_error,
        excluded_paths: excluded,
        clamped_volume_paths: clamped_n,
        nonpositive_price_paths: degenerate_n,
        paths,
    })
}

/// Objective of a fixed schedule for the arithmetic laws, with the AR(1)
/// drift frozen along the certainty-equivalent path X_{t−1} = ρ^{t−1}X_0.
pub fn schedule_objective(model: &ModelParams, schedule: &Schedule, f: Formulation, x0: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut x = x0;
    for (t, s) in schedule.trades.iter().enumerate() {
        let k = match model {
            ModelParams::Benchmark(p) => ArithKernel::benchmark(p),
            ModelParams::Ar1Extra(p) | ModelParams::Spread(p) => ArithKernel::ar1(p, x),
            _ => return None,
        };
        total += k.stage_cost(f, *s, schedule.residuals[t]);
        if let ModelParams::Ar1Extra(p) | ModelParams::Spread(p) = model {
            x *= p.rho;
        }
    }
    Some(total)
}

/// Largest enumeration `brute_force_schedule` accepts.
pub const BRUTE_FORCE_BUDGET: usize = 2_000_000;

/// Exhaustive search over schedules whose stage-t trade is a multiple of
/// 1/grid of the residual. Arithmetic laws use the exact objective; the rest
/// use the simulated objective with common random numbers.
pub fn brute_force_schedule(cfg: &SimConfig, grid: usize, f: Formulation) -> Result<Schedule> {
    cfg.validate()?;
    if grid == 0 {
        return Err(Error::Config("grid must be at least 1".into()));
    }
    let t_max = cfg.horizon.periods;
    let total = cfg.horizon.total_shares;
    let free = t_max - 1;
    let count = (grid + 1).checked_pow(free as u32).filter(|c| *c <= BRUTE_FORCE_BUDGET).ok_or_else(|| {
        Error::Config(format!("{} stages at grid {grid} exceeds the enumeration budget", t_max))
    })?;
    let build = |mut code: usize| {
        let mut trades = Vec::with_capacity(t_max);
        let mut w = total;
        for _ in 0..free {
            let k = code % (grid + 1);
            code /= grid + 1;
            let s = w * k as f64 / grid as f64;
            trades.push(s);
            w -= s;
        }
        trades.push(w);
        Schedule::from_trades(total, &trades)
    };
    let exact = schedule_objective(&cfg.model, &build(0), f, cfg.initial_state.aux).is_some();
    let score = |s: &Schedule| -> Result<f64> {
        if exact {
            Ok(schedule_objective(&cfg.model, s, f, cfg.initial_state.aux).unwrap())
        } else {
            let d = evaluate_policy(cfg, &ExecutionPolicy::Fixed(s.clone()), f)?;
            Ok(d.objective)
        }
    };
    let scored: Vec<(f64, usize)> =
        (0..count).into_par_iter().map(|c| score(&build(c)).map(|v| (v, c))).collect::<Result<_>>()?;
    let best = scored
        .into_iter()
        .filter(|(v, _)| v.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or_else(|| Error::Config("no schedule had a finite objective".into()))?;
    Ok(build(best.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    SignificantAdverse,
    Adverse,
    Neutral,
    Favorable,
    SignificantFavorable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Volatility {
    High,
    Moderate,
    Low,
    None,
}

/// Bucket edges. Momentum uses side-adjusted returns, volatility the
/// coefficient of variation of prices over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketThresholds {
    pub significant: f64,
    pub neutral: f64,
    pub high_vol: f64,
    pub moderate_vol: f64,
    pub no_vol: f64,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        Self { significant: 0.02, neutral: 1.0 / 300.0, high_vol: 0.005, moderate_vol: 0.001, no_vol: 1e-15 }
    }
}

impl BucketThresholds {
    pub fn momentum(&self, r: f64) -> Momentum {
        if r < -self.significant {
            Momentum::SignificantAdverse
        } else if r < -self.neutral {
            Momentum::Adverse
        } else if r <= self.neutral {
            Momentum::Neutral
        } else if r <= self.significant {
            Momentum::Favorable
        } else {
            Momentum::SignificantFavorable
        }
    }

    pub fn volatility(&self, cov: f64) -> Volatility {
        if cov > self.high_vol {
            Volatility::High
        } else if cov >= self.moderate_vol {
            Volatility::Moderate
        } else if cov > self.no_vol {
            Volatility::Low
        } else {
            Volatility::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketSample {
    pub momentum: f64,
    pub cov: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub momentum: Momentum,
    pub volatility: Volatility,
    pub count: usize,
    /// None when the bucket is empty.
    pub cost: Option<Summary>,
}

const MOMENTA: [Momentum; 5] = [
    Momentum::SignificantAdverse,
    Momentum::Adverse,
    Momentum::Neutral,
    Momentum::Favorable,
    Momentum::SignificantFavorable,
];
const VOLS: [Volatility; 4] = [Volatility::High, Volatility::Moderate, Volatility::Low, Volatility::None];

/// Summarizes costs on the 5×4 momentum × volatility grid, all 20 cells
/// reported in a fixed order.
pub fn momentum_volatility_buckets(samples: &[BucketSample], th: &BucketThresholds) -> Vec<BucketSummary> {
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); 20];
    for s in samples {
        let m = MOMENTA.iter().position(|m| *m == th.momentum(s.momentum)).unwrap();
        let v = VOLS.iter().position(|v| *v == th.volatility(s.cov)).unwrap();
        cells[m * 4 + v].push(s.cost);
    }
    let mut out = Vec::with_capacity(20);
    for (mi, m) in MOMENTA.iter().enumerate() {
        for (vi, v) in VOLS.iter().enumerate() {
            let c = &cells[mi * 4 + vi];
            out.push(BucketSummary {
                momentum: *m,
                volatility: *v,
                count: c.len(),
                cost: (!c.is_empty()).then(|| Summary::of(c)),
            });
        }
    }
    out
}

impl CostDistribution {
    pub fn bucket_samples(&self) -> Vec<BucketSample> {
        self.paths.iter().map(|p| BucketSample { momentum: p.momentum, cov: p.cov, cost: p.shortfall }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BenchmarkParams;

    fn bench(theta: f64, sigma: f64, periods: usize, paths: usize) -> SimConfig {
        SimConfig {
            model: ModelParams::Benchmark(BenchmarkParams { theta, sigma_eps: sigma }),
            horizon: Horizon::new(periods, 10.0).unwrap(),
            n_paths: paths,
            seed: 11,
            initial_state: MarketState::new(100.0, 0.0),
        }
    }

    #[test]
    fn noiseless_paths_agree() {
        let cfg = bench(0.1, 0.0, 3, 50);
        let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
        assert_eq!(d.shortfall_summary.std, 0.0);
        assert_eq!(d.n_paths, 50);
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let cfg = bench(0.1, 1.0, 3, 5);
        let s = Schedule::from_trades(10.0, &[5.0, 5.0]);
        assert!(evaluate_policy(&cfg, &ExecutionPolicy::Fixed(s), Formulation::Simple).is_err());
    }

    #[test]
    fn bucket_edges() {
        let th = BucketThresholds::default();
        assert_eq!(th.momentum(-0.03), Momentum::SignificantAdverse);
        assert_eq!(th.momentum(0.0), Momentum::Neutral);
        assert_eq!(th.momentum(0.02), Momentum::Favorable);
        assert_eq!(th.volatility(0.0), Volatility::None);
        assert_eq!(th.volatility(1e-15), Volatility::None);
        assert_eq!(th.volatility(0.001), Volatility::Moderate);
        assert_eq!(th.volatility(0.0051), Volatility::High);
        let b = momentum_volatility_buckets(&[], &th);
        assert_eq!(b.len(), 20);
        assert!(b.iter().all(|c| c.count == 0 && c.cost.is_none()));
    }

    #[test]
    fn budget_enforced() {
        let cfg = bench(0.1, 1.0, 8, 5);
        assert!(matches!(brute_force_schedule(&cfg, 64, Formulation::Simple), Err(Error::Config(_))));
    }
}
