//! Arithmetic-walk laws: the benchmark and the AR(1)/spread extensions.
//!
//! Each stage charges E[ΔP | ΔP > 0] times the executed shares (simple) or the
//! residual (complex), where ΔP = θS + α + shock with shock ~ N(0, β²). The
//! benchmark has α = 0, β = σ_ε. The AR(1) law uses α = γρX at the latest
//! observation, held fixed over the remaining stages, and β = √(γ²σ_η² + σ_ε²).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interp::MonotoneCubic;
use super::optimize::{brent_root, scan_then_golden};
use super::{Formulation, Horizon, PolicyTable, Schedule, SolverConfig, StagePolicy};
use crate::error::{Error, Result};
use crate::models::{convexity_check, Ar1Params, BenchmarkParams, ModelParams};
use crate::stats::{gauss_legendre, mills_ratio, norm_pdf, positive_part_moments, psi, psi_prime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArithKernel {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ArithKernel {
    pub fn benchmark(p: &BenchmarkParams) -> Self {
        Self { theta: p.theta, alpha: 0.0, beta: p.sigma_eps }
    }

    /// Kernel with the drift frozen at observation `x`.
    pub fn ar1(p: &Ar1Params, x: f64) -> Self {
        Self { theta: p.theta, alpha: p.gamma * p.rho * x, beta: p.combined_sigma() }
    }

    /// E[ΔP | ΔP > 0] for a trade of `s`.
    #[inline]
    pub fn conditional_step(&self, s: f64) -> f64 {
        self.beta * psi((self.theta * s + self.alpha) / self.beta)
    }

    #[inline]
    pub fn stage_cost(&self, f: Formulation, s: f64, w: f64) -> f64 {
        match f {
            Formulation::Simple => {
                if s <= 0.0 {
                    0.0
                } else {
                    s * self.conditional_step(s)
                }
            }
            Formulation::Complex => w * self.conditional_step(s),
        }
    }

    /// Partial derivatives of the stage cost in S and in W.
    #[inline]
    pub fn stage_cost_partials(&self, f: Formulation, s: f64, w: f64) -> (f64, f64) {
        let a = (self.theta * s + self.alpha) / self.beta;
        match f {
            Formulation::Simple => (self.beta * psi(a) + self.theta * s * psi_prime(a), 0.0),
            Formulation::Complex => (w * self.theta * psi_prime(a), self.beta * psi(a)),
        }
    }

    /// Last stage executes the residual; both formulations coincide.
    pub fn terminal(&self, w: f64) -> f64 {
        self.stage_cost(Formulation::Simple, w, w)
    }

    /// Simple-formulation value of splitting `w` equally over `n` stages.
    pub fn equal_split_value(&self, w: f64, n: usize) -> f64 {
        let nf = n as f64;
        nf * self.stage_cost(Formulation::Simple, w / nf, w)
    }

    /// Last-but-one objective J(S) = stage cost + terminal cost of the rest.
    pub fn last_two_objective(&self, f: Formulation, w: f64, s: f64) -> f64 {
        self.stage_cost(f, s, w) + self.terminal(w - s)
    }
}

/// Derivative of the last-but-one complex objective, written term by term:
/// θW + θW(−aG(a) − G(a)²) − 2θ(W−S) − α − βG(b) + θ(W−S)(bG(b) + G(b)²)
/// with a = (θS+α)/β, b = (θ(W−S)+α)/β and G = φ/Φ.
/// Returns the residual and the sum of absolute terms.
pub fn complex_foc(k: &ArithKernel, w: f64, s: f64) -> (f64, f64) {
    let r = w - s;
    let a = (k.theta * s + k.alpha) / k.beta;
    let b = (k.theta * r + k.alpha) / k.beta;
    let ga = mills_ratio(a);
    let gb = mills_ratio(b);
    let terms = [
        k.theta * w,
        k.theta * w * (-a * ga - ga * ga),
        -2.0 * k.theta * r,
        -k.alpha,
        -k.beta * gb,
        k.theta * r * (b * gb + gb * gb),
    ];
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

/// Benchmark first-order condition in the ξ = θ/σ_ε form:
/// W + ξ(W−S)²G(b) + (W−S)G(b)² − [2(W−S) + G(b)/ξ + ξWS·G(a) + W·G(a)²]
/// with a = ξS, b = ξ(W−S).
pub fn benchmark_prop4_foc(theta: f64, sigma_eps: f64, w: f64, s: f64) -> (f64, f64) {
    let xi = theta / sigma_eps;
    let r = w - s;
    let ga = mills_ratio(xi * s);
    let gb = mills_ratio(xi * r);
    let terms = [
        w,
        xi * r * r * gb,
        r * gb * gb,
        -2.0 * r,
        -gb / xi,
        -xi * w * s * ga,
        -w * ga * ga,
    ];
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocMethod {
    /// Interior root of the first-order condition.
    Root,
    /// Objective minimized at S = 0 or S = W.
    Boundary,
    /// No sign change; golden-section fallback landed in the interior.
    Golden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocSolution {
    pub s: f64,
    pub objective: f64,
    pub residual: f64,
    pub scale: f64,
    pub method: FocMethod,
}

/// Last-but-one complex stage: bracketed root of the first-order condition,
/// compared against both endpoints; golden-section search when the condition
/// never changes sign.
pub fn solve_last_complex_stage(k: &ArithKernel, w: f64, cfg: &SolverConfig) -> Result<FocSolution> {
    let obj = |s: f64| k.last_two_objective(Formulation::Complex, w, s);
    let g = |s: f64| complex_foc(k, w, s).0;
    let n = cfg.scan_points.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| w * i as f64 / n as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&s| g(s)).collect();
    let mut best: Option<(f64, f64, FocMethod)> = None;
    let consider = |s: f64, m: FocMethod, best: &mut Option<(f64, f64, FocMethod)>| {
        let v = obj(s);
        if best.is_none_or(|b| v < b.1) {
            *best = Some((s, v, m));
        }
    };
    let mut any_root = false;
    for i in 0..n {
        if gs[i] < 0.0 && gs[i + 1] >= 0.0 {
            let s = brent_root(g, xs[i], xs[i + 1], cfg.xtol_rel * w, cfg.root_max_iter)?;
            any_root = true;
            consider(s, FocMethod::Root, &mut best);
        }
    }
    if !any_root {
        let (s, _) = scan_then_golden(obj, 0.0, w, n, cfg.xtol_rel * w);
        let interior = s > 0.0 && s < w;
        consider(s, if interior { FocMethod::Golden } else { FocMethod::Boundary }, &mut best);
    }
    consider(0.0, FocMethod::Boundary, &mut best);
    consider(w, FocMethod::Boundary, &mut best);
    let (s, objective, method) = best.expect("candidates are nonempty");
    let (residual, scale) = complex_foc(k, w, s);
    Ok(FocSolution { s, objective, residual, scale, method })
}

/// Numerical backward recursion on a W-grid for a deterministic kernel.
///
/// Policies are stored as S/W fractions interpolated in W; the continuation
/// value at any residual is obtained by rolling the downstream policies forward,
/// so no value interpolation error enters the stage objective.
pub(crate) struct Recursion {
    kernel: ArithKernel,
    formulation: Formulation,
    periods: usize,
    pub w_grid: Vec<f64>,
    policies: Vec<Option<MonotoneCubic>>,
    pub fractions: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl Recursion {
    pub fn build(kernel: ArithKernel, f: Formulation, periods: usize, total: f64, cfg: &SolverConfig) -> Result<Self> {
        let w_grid = cfg.w_grid(total);
        let mut rec = Recursion {
            kernel,
            formulation: f,
            periods,
            w_grid: w_grid.clone(),
            policies: vec![None; periods],
            fractions: vec![vec![1.0; w_grid.len()]; periods],
            values: vec![Vec::new(); periods],
        };
        rec.values[periods - 1] = w_grid.iter().map(|&w| kernel.terminal(w)).collect();
        for t in (1..periods).rev() {
            let out: Vec<(f64, f64)> = w_grid
                .par_iter()
                .map(|&w| rec.decide(t, w, cfg).map(|(s, v)| (s / w, v)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage(t))?;
            rec.fractions[t - 1] = out.iter().map(|o| o.0).collect();
            rec.values[t - 1] = out.iter().map(|o| o.1).collect();
            rec.policies[t - 1] = Some(MonotoneCubic::new(w_grid.clone(), rec.fractions[t - 1].clone()));
        }
        Ok(rec)
    }

    /// Cost of following the stored policies from stage `t` with residual `w`.
    pub fn rollout(&self, t: usize, mut w: f64) -> f64 {
        let mut v = 0.0;
        for tau in t..=self.periods {
            if w <= 0.0 {
                break;
            }
            let s = match &self.policies[tau - 1] {
                Some(m) if tau < self.periods => m.eval(w).clamp(0.0, 1.0) * w,
                _ => w,
            };
            v += self.kernel.stage_cost(self.formulation, s, w);
            w -= s;
        }
        v
    }

    /// Derivative in `w` of [`Self::rollout`], by the chain rule through the
    /// interpolated policies.
    pub fn rollout_slope(&self, t: usize, w: f64) -> f64 {
        // Forward pass: residual, trade and dS/dW at each stage.
        let mut path = Vec::with_capacity(self.periods + 1 - t);
        let mut w = w;
        for tau in t..=self.periods {
            if w <= 0.0 {
                break;
            }
            let (s, ds) = match &self.policies[tau - 1] {
                Some(m) if tau < self.periods => {
                    let fr = m.eval(w);
                    if (0.0..=1.0).contains(&fr) {
                        (fr * w, fr + w * m.derivative(w))
                    } else {
                        (fr.clamp(0.0, 1.0) * w, fr.clamp(0.0, 1.0))
                    }
                }
                _ => (w, 1.0),
            };
            path.push((w, s, ds));
            w -= s;
        }
        let mut slope = 0.0;
        for &(w, s, ds) in path.iter().rev() {
            let (cs, cw) = self.kernel.stage_cost_partials(self.formulation, s, w);
            slope = cs * ds + cw + slope * (1.0 - ds);
        }
        slope
    }

    /// Optimal trade and value at stage `t` for residual `w`.
    pub fn decide(&self, t: usize, w: f64, cfg: &SolverConfig) -> Result<(f64, f64)> {
        if t == self.periods {
            return Ok((w, self.kernel.terminal(w)));
        }
        if t + 1 == self.periods && self.formulation == Formulation::Complex {
            let sol = solve_last_complex_stage(&self.kernel, w, cfg)?;
            return Ok((sol.s, sol.objective));
        }
        let f = self.formulation;
        let obj = |s: f64| self.kernel.stage_cost(f, s, w) + self.rollout(t + 1, w - s);
        let (s, v) = scan_then_golden(obj, 0.0, w, cfg.scan_points, cfg.xtol_rel * w);
        if s <= 0.0 || s >= w {
            return Ok((s, v));
        }
        // Golden search stalls where the objective is flat to rounding; the
        // derivative does not, so polish with a root of dJ/dS near the minimum.
        let slope = |x: f64| self.kernel.stage_cost_partials(f, x, w).0 - self.rollout_slope(t + 1, w - x);
        let step = w / cfg.scan_points.max(2) as f64;
        let (lo, hi) = ((s - step).max(0.0), (s + step).min(w));
        if slope(lo) < 0.0 && slope(hi) > 0.0 {
            if let Ok(r) = brent_root(slope, lo, hi, 1e-15 * w, cfg.root_max_iter) {
                return Ok((r, obj(r)));
            }
        }
        Ok((s, v))
    }

    pub fn stage_policies(&self) -> Vec<StagePolicy> {
        (1..=self.periods)
            .map(|t| {
                if t == self.periods {
                    StagePolicy::Forced
                } else {
                    StagePolicy::Numerical { w_grid: self.w_grid.clone(), fractions: self.fractions[t - 1].clone() }
                }
            })
            .collect()
    }

    pub fn value_samples(&self) -> Vec<Vec<(f64, f64)>> {
        self.values.iter().map(|v| self.w_grid.iter().copied().zip(v.iter().copied()).collect()).collect()
    }
}

fn convexity_warning(p: &BenchmarkParams) -> Vec<String> {
    match convexity_check(&ModelParams::Benchmark(*p)) {
        Ok(true) => Vec::new(),
        _ => vec![format!(
            "convexity not guaranteed: theta = {} <= 0.75 * sigma_eps = {}; minimization uses a global scan",
            p.theta,
            0.75 * p.sigma_eps
        )],
    }
}

fn forced_only(model: &str, f: Formulation, k: &ArithKernel, h: &Horizon, cfg: &SolverConfig) -> (Schedule, PolicyTable) {
    let grid = cfg.w_grid(h.total_shares);
    let policy = PolicyTable {
        model: model.to_string(),
        formulation: f,
        stages: vec![StagePolicy::Forced],
        value_samples: vec![grid.iter().map(|&w| (w, k.terminal(w))).collect()],
        warnings: Vec::new(),
    };
    (Schedule::from_trades(h.total_shares, &[h.total_shares]), policy)
}

fn closed_linear_stages(periods: usize) -> Vec<StagePolicy> {
    (1..=periods)
        .map(|t| {
            if t == periods {
                StagePolicy::Forced
            } else {
                StagePolicy::ClosedLinear { fraction: 1.0 / (periods - t + 1) as f64 }
            }
        })
        .collect()
}

fn check(h: &Horizon, cfg: &SolverConfig) -> Result<()> {
    h.validate()?;
    cfg.validate()
}

/// Benchmark law, simple formulation: the equal split is optimal and
/// V_{T−K−1}(W) = (K+2)·cost(W/(K+2)).
pub fn solve_benchmark_simple(p: &BenchmarkParams, h: &Horizon, cfg: &SolverConfig) -> Result<(Schedule, PolicyTable)> {
    ModelParams::Benchmark(*p).validate()?;
    check(h, cfg)?;
    let k = ArithKernel::benchmark(p);
    let grid = cfg.w_grid(h.total_shares);
    let t_max = h.periods;
    let value_samples = (1..=t_max)
        .map(|t| grid.iter().map(|&w| (w, k.equal_split_value(w, t_max - t + 1))).collect())
        .collect();
    let policy = PolicyTable {
        model: "benchmark".into(),
        formulation: Formulation::Simple,
        stages: closed_linear_stages(t_max),
        value_samples,
        warnings: convexity_warning(p),
    };
    Ok((Schedule::equal_split(h), policy))
}

/// Benchmark law, complex formulation: root of the first-order condition at
/// the last-but-one stage, grid recursion before it.
pub fn solve_benchmark_complex(p: &BenchmarkParams, h: &Horizon, cfg: &SolverConfig) -> Result<(Schedule, PolicyTable)> {
    ModelParams::Benchmark(*p).validate()?;
    check(h, cfg)?;
    let k = ArithKernel::benchmark(p);
    if h.periods == 1 {
        return Ok(forced_only("benchmark", Formulation::Complex, &k, h, cfg));
    }
    let rec = Recursion::build(k, Formulation::Complex, h.periods, h.total_shares, cfg)?;
    let mut w = h.total_shares;
    let mut trades = Vec::with_capacity(h.periods);
    for t in 1..=h.periods {
        let (s, _) = rec.decide(t, w, cfg).map_err(|e| e.at_stage(t))?;
        trades.push(s);
        w -= s;
    }
    let policy = PolicyTable {
        model: "benchmark".into(),
        formulation: Formulation::Complex,
        stages: rec.stage_policies(),
        value_samples: rec.value_samples(),
        warnings: convexity_warning(p),
    };
    Ok((Schedule::from_trades(h.total_shares, &trades), policy))
}

/// Closed-form AR(1) simple value over `n` remaining stages with frozen drift α:
/// θW²/n + αW + βW·G((θW + nα)/(nβ)).
pub fn ar1_closed_form_value(p: &Ar1Params, alpha: f64, w: f64, n: usize) -> f64 {
    let nf = n as f64;
    let beta = p.combined_sigma();
    p.theta * w * w / nf + alpha * w + beta * w * mills_ratio((p.theta * w + nf * alpha) / (nf * beta))
}

/// The same value with each stage's conditional mean obtained by integrating
/// the information shock numerically and the price shock analytically.
///
/// The integrand turns over on a z-scale of σ_ε/(γσ_η) around the point where
/// the stage mean crosses zero, so the integral over z ∈ [−12, 12] is split
/// into Gauss–Legendre panels of `order` points, refined geometrically around
/// that crossing.
pub fn ar1_quadrature_value(p: &Ar1Params, alpha: f64, w: f64, n: usize, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::Config("quadrature order must be positive".into()));
    }
    let s = w / n as f64;
    let base = p.theta * s + alpha;
    let spread = p.gamma * p.sigma_eta;
    let (lo, hi) = (-12.0, 12.0);
    let mut breaks: Vec<f64> = (0..=48).map(|i| lo + 0.5 * i as f64).collect();
    if spread > 0.0 {
        let z = -base / spread;
        if z > lo && z < hi {
            breaks.push(z);
            let mut d = (p.sigma_eps / spread).clamp(1e-9, 0.5);
            while d < 0.5 {
                breaks.push(z - d);
                breaks.push(z + d);
                d *= 2.0;
            }
        }
    }
    breaks.retain(|b| (lo..=hi).contains(b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let rule = gauss_legendre(order);
    let (mut num, mut den) = (0.0, 0.0);
    for pair in breaks.windows(2) {
        let half = 0.5 * (pair[1] - pair[0]);
        let mid = 0.5 * (pair[0] + pair[1]);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let z = mid + half * t;
            let (pe, pr) = positive_part_moments(base + spread * z, p.sigma_eps);
            let f = wt * half * norm_pdf(z);
            num += f * pe;
            den += f * pr;
        }
    }
    Ok(n as f64 * s * num / den)
}

/// AR(1)/spread law, simple formulation: the equal split is optimal for any
/// observation; value samples use the drift implied by ρ^{t−1}x0 at stage t.
pub fn solve_ar1_simple(p: &Ar1Params, h: &Horizon, x0: f64, cfg: &SolverConfig) -> Result<(Schedule, PolicyTable)> {
    ModelParams::Ar1Extra(*p).validate()?;
    check(h, cfg)?;
    if !x0.is_finite() {
        return Err(Error::invalid("state.aux", "observation must be finite"));
    }
    let grid = cfg.w_grid(h.total_shares);
    let t_max = h.periods;
    let value_samples = (1..=t_max)
        .map(|t| {
            let x = p.rho.powi(t as i32 - 1) * x0;
            let alpha = p.gamma * p.rho * x;
            grid.iter().map(|&w| (w, ar1_closed_form_value(p, alpha, w, t_max - t + 1))).collect()
        })
        .collect();
    let policy = PolicyTable {
        model: "ar1_extra".into(),
        formulation: Formulation::Simple,
        stages: closed_linear_stages(t_max),
        value_samples,
        warnings: Vec::new(),
    };
    Ok((Schedule::equal_split(h), policy))
}

fn alpha_grid(p: &Ar1Params, x0: f64, nodes: usize) -> Vec<f64> {
    let coef = p.gamma * p.rho;
    if coef == 0.0 || nodes == 1 {
        return vec![coef * x0];
    }
    let stationary = p.sigma_eta / (1.0 - p.rho * p.rho).sqrt();
    let half = (4.0 * coef.abs() * stationary).max(1.05 * (coef * x0).abs());
    (0..nodes).map(|i| -half + 2.0 * half * i as f64 / (nodes - 1) as f64).collect()
}

/// AR(1)/spread law, complex formulation. The reported schedule follows the
/// certainty-equivalent path X_{t−1} = ρ^{t−1}x0; the policy table holds the
/// state-contingent rule tabulated over the frozen drift.
pub fn solve_ar1_complex(p: &Ar1Params, h: &Horizon, x0: f64, cfg: &SolverConfig) -> Result<(Schedule, PolicyTable)> {
    ModelParams::Ar1Extra(*p).validate()?;
    check(h, cfg)?;
    if !x0.is_finite() {
        return Err(Error::invalid("state.aux", "observation must be finite"));
    }
    if h.periods == 1 {
        return Ok(forced_only("ar1_extra", Formulation::Complex, &ArithKernel::ar1(p, x0), h, cfg));
    }
    let t_max = h.periods;
    let mut w = h.total_shares;
    let mut trades = Vec::with_capacity(t_max);
    let mut value_samples = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let x = p.rho.powi(t as i32 - 1) * x0;
        let k = ArithKernel::ar1(p, x);
        let remaining = t_max - t + 1;
        if remaining == 1 {
            trades.push(w);
            value_samples.push(cfg.w_grid(h.total_shares).iter().map(|&v| (v, k.terminal(v))).collect());
            break;
        }
        let rec = Recursion::build(k, Formulation::Complex, remaining, h.total_shares, cfg)?;
        let (s, _) = rec.decide(1, w, cfg).map_err(|e| e.at_stage(t))?;
        value_samples.push(rec.value_samples().swap_remove(0));
        trades.push(s);
        w -= s;
    }

    let grid = alpha_grid(p, x0, cfg.alpha_nodes);
    let beta = p.combined_sigma();
    let recs: Vec<Recursion> = grid
        .par_iter()
        .map(|&alpha| {
            let k = ArithKernel { theta: p.theta, alpha, beta };
            Recursion::build(k, Formulation::Complex, t_max, h.total_shares, cfg)
        })
        .collect::<Result<_>>()?;
    let w_grid = recs[0].w_grid.clone();
    let stages = (1..=t_max)
        .map(|t| {
            if t == t_max {
                StagePolicy::Forced
            } else {
                StagePolicy::NumericalAlpha {
                    alpha_coef: p.gamma * p.rho,
                    alpha_grid: grid.clone(),
                    w_grid: w_grid.clone(),
                    fractions: recs.iter().map(|r| r.fractions[t - 1].clone()).collect(),
                }
            }
        })
        .collect();
    let policy = PolicyTable {
        model: "ar1_extra".into(),
        formulation: Formulation::Complex,
        stages,
        value_samples,
        warnings: Vec::new(),
    };
    Ok((Schedule::from_trades(h.total_shares, &trades), policy))
}

/// Deterministic model accepted by [`approximate_recursion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecursionModel {
    Benchmark(BenchmarkParams),
    /// Drift frozen at γρ·x0 for every stage.
    Ar1 { params: Ar1Params, x0: f64 },
}

/// Grid recursion for either formulation, without using any closed form.
pub fn approximate_recursion(
    model: &RecursionModel,
    f: Formulation,
    h: &Horizon,
    cfg: &SolverConfig,
) -> Result<PolicyTable> {
    check(h, cfg)?;
    let (kernel, name, warnings) = match model {
        RecursionModel::Benchmark(p) => {
            ModelParams::Benchmark(*p).validate()?;
            (ArithKernel::benchmark(p), "benchmark", convexity_warning(p))
        }
        RecursionModel::Ar1 { params, x0 } => {
            ModelParams::Ar1Extra(*params).validate()?;
            (ArithKernel::ar1(params, *x0), "ar1_extra", Vec::new())
        }
    };
    let rec = Recursion::build(kernel, f, h.periods, h.total_shares, cfg)?;
    Ok(PolicyTable {
        model: name.into(),
        formulation: f,
        stages: rec.stage_policies(),
        value_samples: rec.value_samples(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench(theta: f64, sigma_eps: f64) -> BenchmarkParams {
        BenchmarkParams { theta, sigma_eps }
    }

    #[test]
    fn foc_forms_agree() {
        let p = bench(1.3, 0.7);
        let k = ArithKernel::benchmark(&p);
        for &(w, s) in &[(2.0, 0.4), (5.0, 3.0), (1.0, 0.9)] {
            let (r1, _) = complex_foc(&k, w, s);
            let (r2, _) = benchmark_prop4_foc(p.theta, p.sigma_eps, w, s);
            assert!((r1 / p.theta - r2).abs() < 1e-12 * (1.0 + r2.abs()), "{r1} {r2}");
        }
    }

    #[test]
    fn foc_is_objective_derivative() {
        let k = ArithKernel { theta: 0.8, alpha: -0.3, beta: 1.2 };
        let w = 4.0;
        for &s in &[0.5, 1.7, 3.2] {
            let h = 1e-5;
            let num = (k.last_two_objective(Formulation::Complex, w, s + h)
                - k.last_two_objective(Formulation::Complex, w, s - h))
                / (2.0 * h);
            let (g, _) = complex_foc(&k, w, s);
            assert!((num - g).abs() < 1e-7, "{num} {g}");
        }
    }

    #[test]
    fn closed_form_equals_equal_split_kernel() {
        let p = Ar1Params { theta: 0.9, gamma: 0.4, rho: 0.7, sigma_eps: 1.1, sigma_eta: 0.6 };
        let k = ArithKernel::ar1(&p, 1.3);
        for n in 1..6 {
            let a = ar1_closed_form_value(&p, k.alpha, 3.0, n);
            let b = k.equal_split_value(3.0, n);
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }

    #[test]
    fn unit_case_is_boundary() {
        let k = ArithKernel::benchmark(&bench(1.0, 1.0));
        let sol = solve_last_complex_stage(&k, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(sol.method, FocMethod::Boundary);
        assert_eq!(sol.s, 1.0);
    }

    #[test]
    fn interior_root_has_small_residual() {
        let k = ArithKernel::benchmark(&bench(1.0, 1.0));
        let sol = solve_last_complex_stage(&k, 6.0, &SolverConfig::default()).unwrap();
        assert_eq!(sol.method, FocMethod::Root);
        assert!(sol.residual.abs() <= 1e-8 * sol.scale);
    }

    #[test]
    fn rollout_of_terminal_is_terminal() {
        let k = ArithKernel::benchmark(&bench(1.0, 1.0));
        let rec = Recursion::build(k, Formulation::Simple, 2, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(rec.rollout(2, 0.3), k.terminal(0.3));
    }
}
