//! Implementation shortfall and its split into market impact and market timing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Formulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// +1 for buys, −1 for sells: price rises are adverse to buyers.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub t: usize,
    pub participant: String,
    pub side: Side,
    pub qty: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderContext {
    pub arrival_price: f64,
    pub total_shares: f64,
    pub horizon: usize,
    /// P_0..P_T, one price per interval.
    pub price_path: Vec<f64>,
}

impl OrderContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_price > 0.0 && self.arrival_price.is_finite()) {
            return Err(Error::invalid("arrival_price", "must be positive and finite"));
        }
        if !(self.total_shares > 0.0 && self.total_shares.is_finite()) {
            return Err(Error::invalid("total_shares", "must be positive and finite"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if self.price_path.len() != self.horizon + 1 {
            return Err(Error::invalid(
                "price_path",
                format!("expected {} entries, got {}", self.horizon + 1, self.price_path.len()),
            ));
        }
        if self.price_path[0] != self.arrival_price {
            return Err(Error::invalid("price_path", "first entry must equal arrival_price"));
        }
        if self.price_path.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("price_path", "entries must be finite"));
        }
        Ok(())
    }

    fn step(&self, t: usize) -> Result<f64> {
        if t == 0 || t >= self.price_path.len() {
            return Err(Error::Validation(format!("no price path entry for interval {t}")));
        }
        Ok(self.price_path[t] - self.price_path[t - 1])
    }
}

/// Which price moves count as impact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactMeasure {
    /// Every adverse step.
    #[default]
    Steps,
    /// Only the part of an adverse step that reaches a new extreme since
    /// arrival, so levels already paid for are not charged twice.
    NewLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub shortfall: f64,
    pub impact: f64,
    pub timing: f64,
    pub shortfall_bps: f64,
    pub impact_bps: f64,
    pub timing_bps: f64,
    pub formulation: Formulation,
}

fn side_of(fills: &[Fill]) -> Result<Side> {
    let side = fills.first().ok_or_else(|| Error::Validation("no fills".into()))?.side;
    if fills.iter().any(|f| f.side != side) {
        return Err(Error::Validation("an order must be all buys or all sells".into()));
    }
    Ok(side)
}

fn check_fills(ctx: &OrderContext, fills: &[Fill]) -> Result<Side> {
    ctx.validate()?;
    let side = side_of(fills)?;
    let mut total = 0.0;
    for f in fills {
        if !(f.qty > 0.0 && f.qty.is_finite()) {
            return Err(Error::invalid("qty", format!("must be positive, got {} at t={}", f.qty, f.t)));
        }
        if !(f.price > 0.0 && f.price.is_finite()) {
            return Err(Error::invalid("price", format!("must be positive, got {} at t={}", f.price, f.t)));
        }
        if f.t == 0 || f.t > ctx.horizon {
            return Err(Error::Validation(format!("fill interval {} outside 1..={}", f.t, ctx.horizon)));
        }
        total += f.qty;
    }
    if (total - ctx.total_shares).abs() > 1e-9 * ctx.total_shares {
        return Err(Error::Validation(format!(
            "fills total {total} shares but the order is for {}",
            ctx.total_shares
        )));
    }
    Ok(side)
}

/// ΣS_tP_t − S̄P_0 for buys; S̄P_0 − ΣS_tP_t for sells.
pub fn shortfall(ctx: &OrderContext, fills: &[Fill]) -> Result<f64> {
    let side = check_fills(ctx, fills)?;
    let paid: f64 = fills.iter().map(|f| f.qty * f.price).sum();
    Ok(side.sign() * (paid - ctx.total_shares * ctx.arrival_price))
}

/// Adverse part of each interval's price step, per the chosen measure.
fn adverse_steps(ctx: &OrderContext, side: Side, measure: ImpactMeasure) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ctx.horizon + 1];
    let s = side.sign();
    let mut extreme = s * ctx.arrival_price;
    for (t, slot) in out.iter_mut().enumerate().skip(1) {
        let step = s * ctx.step(t)?;
        *slot = match measure {
            ImpactMeasure::Steps => step.max(0.0),
            ImpactMeasure::NewLevels => {
                let level = s * ctx.price_path[t];
                let gained = (level - extreme).max(0.0).min(step.max(0.0));
                extreme = extreme.max(level);
                gained
            }
        };
    }
    Ok(out)
}

/// Σ max(adverse step, 0)·S_t.
pub fn impact_simple(ctx: &OrderContext, fills: &[Fill]) -> Result<f64> {
    impact_simple_with(ctx, fills, ImpactMeasure::Steps)
}

pub fn impact_simple_with(ctx: &OrderContext, fills: &[Fill], measure: ImpactMeasure) -> Result<f64> {
    let side = check_fills(ctx, fills)?;
    let up = adverse_steps(ctx, side, measure)?;
    Ok(fills.iter().map(|f| up[f.t] * f.qty).sum())
}

/// Σ max(adverse step, 0)·W_t, with W_t the shares still to trade entering interval t.
pub fn impact_complex(ctx: &OrderContext, fills: &[Fill]) -> Result<f64> {
    impact_complex_with(ctx, fills, ImpactMeasure::Steps)
}

pub fn impact_complex_with(ctx: &OrderContext, fills: &[Fill], measure: ImpactMeasure) -> Result<f64> {
    let side = check_fills(ctx, fills)?;
    let up = adverse_steps(ctx, side, measure)?;
    let residual = residuals(ctx, fills);
    Ok((1..=ctx.horizon).map(|t| up[t] * residual[t]).sum())
}

/// W_t for t = 0..=T (index 0 unused), from S̄ and the fills.
fn residuals(ctx: &OrderContext, fills: &[Fill]) -> Vec<f64> {
    let mut per_t = vec![0.0; ctx.horizon + 2];
    for f in fills {
        per_t[f.t] += f.qty;
    }
    let mut w = vec![0.0; ctx.horizon + 1];
    let mut remaining = ctx.total_shares;
    for t in 1..=ctx.horizon {
        w[t] = remaining.max(0.0);
        remaining -= per_t[t];
    }
    w
}

pub fn impact(ctx: &OrderContext, fills: &[Fill], f: Formulation) -> Result<f64> {
    match f {
        Formulation::Simple => impact_simple(ctx, fills),
        Formulation::Complex => impact_complex(ctx, fills),
    }
}

/// Shortfall minus impact.
pub fn timing(ctx: &OrderContext, fills: &[Fill], f: Formulation) -> Result<f64> {
    Ok(shortfall(ctx, fills)? - impact(ctx, fills, f)?)
}

pub fn attribute(ctx: &OrderContext, fills: &[Fill], f: Formulation) -> Result<AttributionReport> {
    attribute_with(ctx, fills, f, ImpactMeasure::Steps)
}

pub fn attribute_with(ctx: &OrderContext, fills: &[Fill], f: Formulation, measure: ImpactMeasure) -> Result<AttributionReport> {
    let sf = shortfall(ctx, fills)?;
    let im = match f {
        Formulation::Simple => impact_simple_with(ctx, fills, measure)?,
        Formulation::Complex => impact_complex_with(ctx, fills, measure)?,
    };
    let tm = sf - im;
    let bps = 1e4 / (ctx.arrival_price * ctx.total_shares);
    Ok(AttributionReport {
        shortfall: sf,
        impact: im,
        timing: tm,
        shortfall_bps: sf * bps,
        impact_bps: im * bps,
        timing_bps: tm * bps,
        formulation: f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantReport {
    pub participant: String,
    pub side: Side,
    pub total_shares: f64,
    pub report: AttributionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub participants: Vec<ParticipantReport>,
    pub total_impact: f64,
    pub total_timing: f64,
    pub total: f64,
    /// Σ S̄·P_0 across participants; the tolerance is relative to this.
    pub scale: f64,
    pub passed: bool,
}

/// Groups fills by participant, keeping first-appearance order.
pub fn by_participant(fills: &[Fill]) -> Vec<(String, Vec<Fill>)> {
    let mut order: Vec<(String, Vec<Fill>)> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for f in fills {
        let i = *index.entry(f.participant.as_str()).or_insert_with(|| {
            order.push((f.participant.clone(), Vec::new()));
            order.len() - 1
        });
        order[i].1.push(f.clone());
    }
    order
}

/// Checks that every interval is balanced, attributes each participant
/// against the common path, and tests Σimpact + Σtiming = 0.
pub fn zero_sum_audit(fills: &[Fill], price_path: &[f64], f: Formulation) -> Result<AuditResult> {
    if price_path.len() < 2 {
        return Err(Error::invalid("price_path", "needs at least P_0 and P_1"));
    }
    let horizon = price_path.len() - 1;
    let mut bought = vec![0.0; horizon + 1];
    let mut sold = vec![0.0; horizon + 1];
    for fl in fills {
        if fl.t == 0 || fl.t > horizon {
            return Err(Error::Validation(format!("fill interval {} outside 1..={horizon}", fl.t)));
        }
        match fl.side {
            Side::Buy => bought[fl.t] += fl.qty,
            Side::Sell => sold[fl.t] += fl.qty,
        }
    }
    for t in 1..=horizon {
        let tol = 1e-9 * bought[t].max(sold[t]).max(1.0);
        if (bought[t] - sold[t]).abs() > tol {
            return Err(Error::Unbalanced { interval: t, bought: bought[t], sold: sold[t] });
        }
    }
    let mut participants = Vec::new();
    let (mut ti, mut tt, mut scale) = (0.0, 0.0, 0.0);
    for (name, own) in by_participant(fills) {
        let total: f64 = own.iter().map(|x| x.qty).sum();
        let ctx = OrderContext {
            arrival_price: price_path[0],
            total_shares: total,
            horizon,
            price_path: price_path.to_vec(),
        };
        let side = side_of(&own)?;
        let report = attribute(&ctx, &own, f)?;
        ti += report.impact;
        tt += report.timing;
        scale += total * price_path[0];
        participants.push(ParticipantReport { participant: name, side, total_shares: total, report });
    }
    let total = ti + tt;
    Ok(AuditResult {
        participants,
        total_impact: ti,
        total_timing: tt,
        total,
        scale,
        passed: total.abs() <= 1e-9 * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(t: usize, who: &str, side: Side, qty: f64, price: f64) -> Fill {
        Fill { t, participant: who.into(), side, qty, price }
    }

    fn ctx(path: &[f64], total: f64) -> OrderContext {
        OrderContext { arrival_price: path[0], total_shares: total, horizon: path.len() - 1, price_path: path.to_vec() }
    }

    #[test]
    fn shortfall_examples() {
        let c = ctx(&[100.0, 101.0], 10.0);
        assert_eq!(shortfall(&c, &[fill(1, "a", Side::Buy, 10.0, 101.0)]).unwrap(), 10.0);
        let c = ctx(&[100.0, 101.0, 99.0], 100.0);
        let f = [fill(1, "a", Side::Buy, 50.0, 101.0), fill(2, "a", Side::Buy, 50.0, 99.0)];
        assert_eq!(shortfall(&c, &f).unwrap(), 0.0);
    }

    #[test]
    fn quantity_mismatch_rejected() {
        let c = ctx(&[100.0, 101.0], 10.0);
        assert!(matches!(shortfall(&c, &[fill(1, "a", Side::Buy, 9.0, 101.0)]), Err(Error::Validation(_))));
    }

    #[test]
    fn new_levels_skip_recovered_ground() {
        let c = ctx(&[100.0, 102.0, 101.0, 103.0], 3.0);
        let f = [
            fill(1, "a", Side::Buy, 1.0, 102.0),
            fill(2, "a", Side::Buy, 1.0, 101.0),
            fill(3, "a", Side::Buy, 1.0, 103.0),
        ];
        assert_eq!(impact_simple(&c, &f).unwrap(), 4.0);
        assert_eq!(impact_simple_with(&c, &f, ImpactMeasure::NewLevels).unwrap(), 3.0);
    }

    #[test]
    fn unbalanced_interval_is_named() {
        let f = [fill(1, "a", Side::Buy, 10.0, 101.0), fill(1, "b", Side::Sell, 9.0, 101.0)];
        let e = zero_sum_audit(&f, &[100.0, 101.0], Formulation::Simple).unwrap_err();
        assert!(matches!(e, Error::Unbalanced { interval: 1, .. }));
    }
}
