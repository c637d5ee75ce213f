//! Liquidity-constrained law with an AR(1) volume state.
//!
//! ΔP = P(α + βS − γρO − γη) + ε, O' = ρO + η, with β = θ + γ. Each stage
//! charges E[ΔP | ΔP > 0] times shares executed (simple) or residual (complex).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::optimize::scan_then_golden;
use super::regression::{StateKind, Surrogate};
use super::{Formulation, Horizon, PolicyTable, Schedule, SolverConfig, StagePolicy};
use crate::error::{Error, Result};
use crate::models::{LiquidityParams, MarketState, ModelParams};
use crate::stats::{gauss_hermite, psi};

/// Sampled state coordinates, residual and realized value.
type Sample = ([f64; 2], f64, f64);

const REGRESSION_SCAN: usize = 16;
const REGRESSION_XTOL: f64 = 1e-8;

/// V_T = b·W·ψ(P(α + βW − γρO)/b) with b = √(γ²P²σ_η² + σ_ε²).
pub fn liquidity_terminal_value(p: &LiquidityParams, price: f64, volume: f64, w: f64) -> f64 {
    liquidity_stage_cost(p, Formulation::Simple, price, volume, w, w)
}

pub fn liquidity_stage_cost(p: &LiquidityParams, f: Formulation, price: f64, volume: f64, s: f64, w: f64) -> f64 {
    let b = p.shock_sigma(price);
    let m = price * (p.alpha + p.beta * s - p.gamma * p.rho * volume);
    let q = match f {
        Formulation::Simple => s,
        Formulation::Complex => w,
    };
    if q <= 0.0 {
        return 0.0;
    }
    q * b * psi(m / b)
}

/// Trade interval at a stage with `later` stages after it: at most the
/// expected volume ρO now, and at least what the expected volumes of the later
/// stages cannot absorb.
pub fn liquidity_search_interval(p: &LiquidityParams, volume: f64, w: f64, later: usize, stage: usize) -> Result<(f64, f64)> {
    let hi = w.min((p.rho * volume).max(0.0));
    let mut cap = 0.0;
    let mut o = p.rho * volume;
    for _ in 0..later {
        o *= p.rho;
        cap += o.max(0.0);
    }
    let lo = (w - cap).max(0.0);
    if later == 0 && w > hi {
        return Err(Error::InfeasibleLiquidity {
            stage,
            reason: format!("residual {w} exceeds expected volume {}", (p.rho * volume).max(0.0)),
        });
    }
    if lo > hi || hi <= 0.0 && w > 0.0 {
        return Err(Error::InfeasibleLiquidity {
            stage,
            reason: format!("empty trade interval [{lo}, {hi}] for residual {w}"),
        });
    }
    Ok((lo, hi))
}

/// Last-but-one objective: stage cost plus E over (η, ε) of V_T, by a tensor
/// Gauss–Hermite rule of the given order.
pub fn liquidity_t_minus_1_objective(
    p: &LiquidityParams,
    f: Formulation,
    price: f64,
    volume: f64,
    w: f64,
    s: f64,
    order: usize,
) -> Result<f64> {
    let (z, wt) = gauss_hermite(order)?.standard_normal();
    Ok(t_minus_1(p, f, price, volume, w, s, &z, &wt))
}

#[allow(clippy::too_many_arguments)]
fn t_minus_1(p: &LiquidityParams, f: Formulation, price: f64, volume: f64, w: f64, s: f64, z: &[f64], wt: &[f64]) -> f64 {
    let rest = w - s;
    let mut cont = 0.0;
    if rest > 0.0 {
        for (ze, we) in z.iter().zip(wt) {
            for (zn, wn) in z.iter().zip(wt) {
                let eta = p.sigma_eta * zn;
                let o1 = p.rho * volume + eta;
                let p1 = price * (p.alpha + 1.0 + p.beta * s - p.gamma * p.rho * volume - p.gamma * eta) + p.sigma_eps * ze;
                cont += we * wn * liquidity_terminal_value(p, p1, o1, rest);
            }
        }
    }
    liquidity_stage_cost(p, f, price, volume, s, w) + cont
}

struct Stages<'a> {
    p: &'a LiquidityParams,
    f: Formulation,
    periods: usize,
    surrogates: Vec<Option<Surrogate>>,
    z: Vec<f64>,
    wt: Vec<f64>,
}

impl Stages<'_> {
    fn objective(&self, t: usize, price: f64, volume: f64, w: f64, s: f64) -> f64 {
        if t + 1 == self.periods {
            return t_minus_1(self.p, self.f, price, volume, w, s, &self.z, &self.wt);
        }
        let p = self.p;
        let rest = w - s;
        let mut cont = 0.0;
        if rest > 0.0 {
            let sur = self.surrogates[t + 1].as_ref().expect("later surrogate fitted first");
            for (ze, we) in self.z.iter().zip(&self.wt) {
                for (zn, wn) in self.z.iter().zip(&self.wt) {
                    let eta = p.sigma_eta * zn;
                    let o1 = p.rho * volume + eta;
                    let p1 = price * (p.alpha + 1.0 + p.beta * s - p.gamma * p.rho * volume - p.gamma * eta)
                        + p.sigma_eps * ze;
                    cont += we * wn * sur.value([p1, o1], rest);
                }
            }
        }
        liquidity_stage_cost(p, self.f, price, volume, s, w) + cont
    }

    fn decide(&self, t: usize, price: f64, volume: f64, w: f64, scan: usize, xtol: f64) -> Result<(f64, f64)> {
        let later = self.periods - t;
        let (lo, hi) = liquidity_search_interval(self.p, volume, w, later, t)?;
        if later == 0 {
            return Ok((w, liquidity_terminal_value(self.p, price, volume, w)));
        }
        Ok(scan_then_golden(|s| self.objective(t, price, volume, w, s), lo, hi, scan, xtol * w))
    }
}

fn sample_states(p: &LiquidityParams, h: &Horizon, state: &MarketState, n: usize, seed: u64) -> Vec<Vec<[f64; 2]>> {
    let mut out = vec![Vec::with_capacity(n); h.periods + 1];
    let step_size = h.total_shares / h.periods as f64;
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (mut price, mut volume) = (state.price, state.aux);
        out[1].push([price, volume]);
        for stage in out.iter_mut().take(h.periods + 1).skip(2) {
            let u: f64 = rng.random();
            let ze: f64 = rng.sample(StandardNormal);
            let zn: f64 = rng.sample(StandardNormal);
            let o1 = (p.rho * volume + p.sigma_eta * zn).max(0.0);
            let s = (2.0 * u * step_size).min(o1);
            price = price * (p.alpha + 1.0 + p.beta * s - p.gamma * o1) + p.sigma_eps * ze;
            volume = o1;
            stage.push([price, volume]);
        }
    }
    out
}

/// Liquidity law, either formulation. Stage T−1 takes the exact expectation
/// of the terminal value by tensor Gauss–Hermite quadrature; earlier stages use
/// quadratic surrogates in (P, O) fitted on simulated states.
pub fn solve_liquidity(
    p: &LiquidityParams,
    f: Formulation,
    h: &Horizon,
    state: &MarketState,
    cfg: &SolverConfig,
) -> Result<(Schedule, PolicyTable)> {
    ModelParams::Liquidity(*p).validate()?;
    h.validate()?;
    cfg.validate()?;
    let t_max = h.periods;
    let w_grid = super::interp::log_grid(h.total_shares * cfg.grid_lower_ratio, h.total_shares, cfg.regression_grid_nodes);
    let (zi, wi) = gauss_hermite(cfg.inner_quadrature_order)?.standard_normal();
    let (zo, wo) = gauss_hermite(cfg.quadrature_order)?.standard_normal();
    let mut inner = Stages { p, f, periods: t_max, surrogates: vec![None; t_max + 1], z: zi, wt: wi };

    let samples = if t_max >= 3 {
        sample_states(p, h, state, cfg.regression_samples, cfg.seed)
    } else {
        Vec::new()
    };
    let mut policies = vec![StagePolicy::Forced; t_max];
    let mut dropped = 0usize;
    for t in (2..t_max).rev() {
        let per_node: Vec<(Vec<Sample>, usize)> = w_grid
            .par_iter()
            .map(|&w| {
                let mut kept = Vec::new();
                let mut bad = 0;
                for c in &samples[t] {
                    match inner.decide(t, c[0], c[1], w, REGRESSION_SCAN, REGRESSION_XTOL) {
                        Ok((s, v)) if v.is_finite() => kept.push((*c, v, s / w)),
                        Ok(_) | Err(Error::InfeasibleLiquidity { .. }) => bad += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok((kept, bad))
            })
            .collect::<Result<_>>()?;
        dropped += per_node.iter().map(|n| n.1).sum::<usize>();
        let nodes: Vec<_> = per_node.into_iter().map(|n| n.0).collect();
        let sur = Surrogate::fit(StateKind::PriceVolume, w_grid.clone(), &nodes)
            .ok_or_else(|| Error::InfeasibleLiquidity { stage: t, reason: "no feasible sampled states".into() })?;
        policies[t - 1] =
            StagePolicy::Regression { w_grid: w_grid.clone(), features: sur.features, coefficients: sur.fraction_coefs.clone() };
        inner.surrogates[t] = Some(sur);
    }
    let outer = Stages { p, f, periods: t_max, surrogates: inner.surrogates.clone(), z: zo, wt: wo };

    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("{dropped} sampled (state, W) pairs had an empty trade interval and were excluded from regression"));
    }
    let mut value_samples = vec![Vec::new(); t_max];
    if t_max > 1 {
        let first: Vec<(f64, f64)> = w_grid
            .par_iter()
            .map(|&w| match outer.decide(1, state.price, state.aux, w, cfg.scan_points, cfg.xtol_rel) {
                Ok((s, v)) => (s / w, v),
                Err(_) => {
                    let hi = w.min((p.rho * state.aux).max(0.0));
                    (hi / w, f64::NAN)
                }
            })
            .collect();
        policies[0] = StagePolicy::Numerical { w_grid: w_grid.clone(), fractions: first.iter().map(|f| f.0).collect() };
        value_samples[0] = w_grid.iter().zip(&first).filter(|(_, f)| f.1.is_finite()).map(|(w, f)| (*w, f.1)).collect();
    }

    // Certainty-equivalent path: shocks at zero.
    let mut trades = Vec::with_capacity(t_max);
    let (mut price, mut volume) = (state.price, state.aux);
    let mut w = h.total_shares;
    for t in 1..=t_max {
        let (s, _) = outer.decide(t, price, volume, w, cfg.scan_points, cfg.xtol_rel)?;
        if t + 1 == t_max {
            let v40 = t_minus_1(p, f, price, volume, w, s, &outer.z, &outer.wt);
            let v80 = liquidity_t_minus_1_objective(p, f, price, volume, w, s, 2 * cfg.quadrature_order)?;
            let rel = (v80 - v40).abs() / v80.abs().max(f64::MIN_POSITIVE);
            if rel > cfg.resolution_tol {
                warnings.push(format!(
                    "stage {t}: quadrature under-resolved, doubling the order changes the objective by {rel:.3e} relative"
                ));
            }
        }
        if t > 1 {
            value_samples[t - 1] = w_grid
                .iter()
                .filter_map(|&wn| {
                    let v = if t == t_max {
                        Some(liquidity_terminal_value(p, price, volume, wn))
                    } else {
                        outer.decide(t, price, volume, wn, REGRESSION_SCAN, REGRESSION_XTOL).ok().map(|r| r.1)
                    };
                    v.map(|v| (wn, v))
                })
                .collect();
        } else if t_max == 1 {
            value_samples[0] = w_grid.iter().map(|&wn| (wn, liquidity_terminal_value(p, price, volume, wn))).collect();
        }
        trades.push(s);
        let o1 = p.rho * volume;
        price *= p.alpha + 1.0 + p.beta * s - p.gamma * o1;
        volume = o1;
        w -= s;
    }
    let policy = PolicyTable { model: "liquidity".into(), formulation: f, stages: policies, value_samples, warnings };
    Ok((Schedule::from_trades(h.total_shares, &trades), policy))
}
