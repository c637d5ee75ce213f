//! Linear-percentage law: geometric no-impact price with proportional impact.
//!
//! Values are homogeneous of degree one in (P̃, P), so the recursion works in
//! units of the no-impact price with state (r = P/P̃, X).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::optimize::scan_then_golden;
use super::regression::{StateKind, Surrogate};
use super::{Formulation, Horizon, PolicyTable, Schedule, SolverConfig, StagePolicy};
use crate::error::{Error, Result};
use crate::models::{GbmParams, MarketState, ModelParams};
use crate::stats::{gauss_hermite, lognormal_shifted_mean, nln_mixture_expectation, Gaussian};

const REGRESSION_SCAN: usize = 16;
const REGRESSION_XTOL: f64 = 1e-8;

/// Expected terminal cost E[Y₂ | Y₂ > 0] for executing `w` at the last stage,
/// Y₂ = P̃e^B·w(1 + θw + γρX + γη) − wP.
pub fn gbm_terminal_value(p: &GbmParams, no_impact_price: f64, price: f64, x: f64, w: f64) -> Result<f64> {
    if w <= 0.0 {
        return Ok(0.0);
    }
    let b = Gaussian::new(p.mu_b, p.sigma_b)?;
    let mean_y = w * no_impact_price * (1.0 + p.theta * w + p.gamma * p.rho * x);
    let sd_y = w * no_impact_price * p.gamma * p.sigma_eta;
    let k = -w * price;
    if sd_y > 0.0 {
        nln_mixture_expectation(b, Gaussian::new(mean_y, sd_y)?, k)
    } else {
        lognormal_shifted_mean(b, mean_y, k)
    }
}

/// Simple-formulation stage cost E[(P_t − P_{t−1}) S | P_t > P_{t−1}].
pub fn gbm_stage_cost(p: &GbmParams, no_impact_price: f64, price: f64, x: f64, s: f64) -> Result<f64> {
    gbm_terminal_value(p, no_impact_price, price, x, s)
}

struct Stages<'a> {
    p: &'a GbmParams,
    periods: usize,
    /// Surrogates for stages 2..T−1, indexed by stage.
    surrogates: Vec<Option<Surrogate>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    growth: f64,
}

impl Stages<'_> {
    /// Normalized continuation value entering stage `t` with state (r, x).
    fn value(&self, t: usize, r: f64, x: f64, w: f64) -> Result<f64> {
        if t == self.periods {
            gbm_terminal_value(self.p, 1.0, r, x, w)
        } else {
            Ok(self.surrogates[t].as_ref().map_or(0.0, |s| s.value([r, x], w)))
        }
    }

    /// Stage-`t` objective for trade `s` at normalized state (r, x).
    fn objective(&self, t: usize, r: f64, x: f64, w: f64, s: f64) -> Result<f64> {
        let p = self.p;
        let mut cont = 0.0;
        if w - s > 0.0 {
            for (z, wt) in self.nodes.iter().zip(&self.weights) {
                let x1 = p.rho * x + p.sigma_eta * z;
                let r1 = 1.0 + p.theta * s + p.gamma * x1;
                cont += wt * self.value(t + 1, r1, x1, w - s)?;
            }
        }
        Ok(gbm_stage_cost(p, 1.0, r, x, s)? + self.growth * cont)
    }

    fn decide(&self, t: usize, r: f64, x: f64, w: f64, scan: usize, xtol: f64) -> Result<(f64, f64)> {
        if t == self.periods {
            return Ok((w, gbm_terminal_value(self.p, 1.0, r, x, w)?));
        }
        let mut err = None;
        let (s, v) = scan_then_golden(
            |s| match self.objective(t, r, x, w, s) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::INFINITY
                }
            },
            0.0,
            w,
            scan,
            xtol * w,
        );
        match err {
            Some(e) if !v.is_finite() => Err(e.at_stage(t)),
            _ => Ok((s, v)),
        }
    }
}

/// Sampled normalized states (r, x) entering each stage, under randomized
/// trades so that the samples cover the reachable range of r.
fn sample_states(p: &GbmParams, h: &Horizon, r0: f64, x0: f64, n: usize, seed: u64) -> Vec<Vec<[f64; 2]>> {
    let mut out = vec![Vec::with_capacity(n); h.periods + 1];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (mut r, mut x) = (r0, x0);
        out[1].push([r, x]);
        for stage in out.iter_mut().take(h.periods + 1).skip(2) {
            let u: f64 = rng.random();
            let s = u * h.total_shares;
            let z: f64 = rng.sample(StandardNormal);
            x = p.rho * x + p.sigma_eta * z;
            r = 1.0 + p.theta * s + p.gamma * x;
            stage.push([r, x]);
        }
    }
    out
}

/// Linear-percentage law, simple formulation. The last stage uses the
/// normal–lognormal mixture; earlier stages fit quadratic least-squares
/// surrogates in (P/P̃, X) on simulated states.
pub fn solve_gbm_simple(
    p: &GbmParams,
    h: &Horizon,
    state: &MarketState,
    cfg: &SolverConfig,
) -> Result<(Schedule, PolicyTable)> {
    ModelParams::LinearPercentage(*p).validate()?;
    h.validate()?;
    cfg.validate()?;
    if !(state.no_impact_price > 0.0 && state.price > 0.0) {
        return Err(Error::invalid("state", "prices must be positive for the linear-percentage law"));
    }
    let t_max = h.periods;
    let p0 = state.no_impact_price;
    let r0 = state.price / p0;
    let x0 = state.aux;
    let rule = gauss_hermite(cfg.inner_quadrature_order)?;
    let (nodes, weights) = rule.standard_normal();
    let w_grid = super::interp::log_grid(h.total_shares * cfg.grid_lower_ratio, h.total_shares, cfg.regression_grid_nodes);
    let mut stages = Stages {
        p,
        periods: t_max,
        surrogates: vec![None; t_max + 1],
        nodes,
        weights,
        growth: (p.mu_b + 0.5 * p.sigma_b * p.sigma_b).exp(),
    };

    let samples = sample_states(p, h, r0, x0, cfg.regression_samples, cfg.seed);
    let mut policies = vec![StagePolicy::Forced; t_max];
    for t in (2..t_max).rev() {
        let per_node: Vec<Vec<([f64; 2], f64, f64)>> = w_grid
            .par_iter()
            .map(|&w| {
                samples[t]
                    .iter()
                    .map(|c| {
                        let (s, v) = stages.decide(t, c[0], c[1], w, REGRESSION_SCAN, REGRESSION_XTOL)?;
                        Ok((*c, v, s / w))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let sur = Surrogate::fit(StateKind::PriceRatio, w_grid.clone(), &per_node)
            .ok_or_else(|| Error::Config(format!("stage {t}: no usable regression samples")))?;
        policies[t - 1] = StagePolicy::Regression {
            w_grid: w_grid.clone(),
            features: sur.features,
            coefficients: sur.fraction_coefs.clone(),
        };
        stages.surrogates[t] = Some(sur);
    }

    let mut warnings = Vec::new();
    let mut value_samples = vec![Vec::new(); t_max];
    if t_max > 1 {
        let first: Vec<(f64, f64)> = w_grid
            .par_iter()
            .map(|&w| stages.decide(1, r0, x0, w, cfg.scan_points, cfg.xtol_rel).map(|(s, v)| (s / w, v)))
            .collect::<Result<_>>()?;
        policies[0] = StagePolicy::Numerical { w_grid: w_grid.clone(), fractions: first.iter().map(|f| f.0).collect() };
        value_samples[0] = w_grid.iter().zip(&first).map(|(w, f)| (*w, p0 * f.1)).collect();
    }

    // Certainty-equivalent path: B at its mean, η = 0.
    let mut trades = Vec::with_capacity(t_max);
    let (mut r, mut x, mut scale) = (r0, x0, p0);
    let mut w = h.total_shares;
    for t in 1..=t_max {
        let (s, _) = stages.decide(t, r, x, w, cfg.scan_points, cfg.xtol_rel).map_err(|e| match e {
            Error::Stage { .. } => e,
            e => e.at_stage(t),
        })?;
        if t > 1 {
            value_samples[t - 1] = w_grid
                .iter()
                .map(|&wn| stages.value(t, r, x, wn).map(|v| (wn, scale * v)))
                .collect::<Result<_>>()?;
        } else if t_max == 1 {
            value_samples[0] = w_grid
                .iter()
                .map(|&wn| gbm_terminal_value(p, p0, state.price, x0, wn).map(|v| (wn, v)))
                .collect::<Result<_>>()?;
        }
        trades.push(s);
        w -= s;
        x *= p.rho;
        r = 1.0 + p.theta * s + p.gamma * x;
        scale *= p.mu_b.exp();
    }
    if p.gamma == 0.0 && t_max > 2 {
        warnings.push("gamma = 0: the information state does not affect costs; regression is one-dimensional".into());
    }
    let policy = PolicyTable {
        model: "linear_percentage".into(),
        formulation: Formulation::Simple,
        stages: policies,
        value_samples,
        warnings,
    };
    Ok((Schedule::from_trades(h.total_shares, &trades), policy))
}
