//! Shortfall decomposition on worked paths and the zero-sum property.

use execdp::attribution::*;
use execdp::solver::Formulation;
use execdp::Error;
use proptest::prelude::*;

fn buy(t: usize, qty: f64, price: f64) -> Fill {
    Fill { t, participant: "buyer".into(), side: Side::Buy, qty, price }
}

fn ctx(path: &[f64], total: f64) -> OrderContext {
    OrderContext { arrival_price: path[0], total_shares: total, horizon: path.len() - 1, price_path: path.to_vec() }
}

/// Buys `qty[t]` at each interval's path price.
fn fills_on(path: &[f64], qty: &[f64]) -> Vec<Fill> {
    qty.iter().enumerate().filter(|(_, q)| **q > 0.0).map(|(i, q)| buy(i + 1, *q, path[i + 1])).collect()
}

#[test]
fn simple_impact_examples() {
    let c = ctx(&[100.0, 101.0, 100.5], 20.0);
    assert_eq!(impact_simple(&c, &fills_on(&c.price_path, &[10.0, 10.0])).unwrap(), 10.0);
    let c = ctx(&[100.0, 101.0, 102.0], 20.0);
    assert_eq!(impact_simple(&c, &fills_on(&c.price_path, &[10.0, 10.0])).unwrap(), 20.0);
    let c = ctx(&[100.0, 100.0, 100.0], 20.0);
    assert_eq!(impact_simple(&c, &fills_on(&c.price_path, &[10.0, 10.0])).unwrap(), 0.0);
}

#[test]
fn monotone_up_simple_timing_is_drift_on_later_fills() {
    let path = [100.0, 100.7, 101.9, 103.0, 103.25];
    let qty = [3.0, 5.0, 2.0, 7.0];
    let c = ctx(&path, 17.0);
    let f = fills_on(&path, &qty);
    let want: f64 = (1..qty.len()).map(|t| qty[t] * (path[t] - path[0])).sum();
    let got = timing(&c, &f, Formulation::Simple).unwrap();
    assert!((got - want).abs() < 1e-12 * 17.0 * 100.0, "{got} vs {want}");
}

#[test]
fn monotone_up_complex_timing_is_zero() {
    let path = [100.0, 100.5, 101.0, 101.25, 102.0];
    let c = ctx(&path, 40.0);
    let f = fills_on(&path, &[10.0, 10.0, 10.0, 10.0]);
    assert_eq!(timing(&c, &f, Formulation::Complex).unwrap(), 0.0);
}

#[test]
fn complex_dip_timing_is_residual_weighted_down_steps() {
    // Up, down, down: timing = W₂(P₂−P₁) + W₃(P₃−P₂).
    let path = [100.0, 101.0, 100.25, 99.5];
    let qty = [6.0, 5.0, 9.0];
    let c = ctx(&path, 20.0);
    let f = fills_on(&path, &qty);
    let (w2, w3) = (14.0, 9.0);
    let want = w2 * (path[2] - path[1]) + w3 * (path[3] - path[2]);
    let got = timing(&c, &f, Formulation::Complex).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn single_interval_formulations_agree() {
    let c = ctx(&[100.0, 101.0], 10.0);
    let f = [buy(1, 10.0, 101.0)];
    assert_eq!(impact_complex(&c, &f).unwrap(), 10.0);
    assert_eq!(impact_simple(&c, &f).unwrap(), impact_complex(&c, &f).unwrap());
}

#[test]
fn basis_points_use_arrival_notional() {
    let c = ctx(&[100.0, 101.0], 10.0);
    let r = attribute(&c, &[buy(1, 10.0, 101.0)], Formulation::Simple).unwrap();
    assert_eq!(r.shortfall, 10.0);
    assert!((r.shortfall_bps - 100.0).abs() < 1e-12);
    assert!((r.impact_bps + r.timing_bps - r.shortfall_bps).abs() < 1e-12);
}

#[test]
fn one_buyer_one_seller_single_interval() {
    for (p1, buyer, seller) in [(101.0, (10.0, 0.0), (0.0, -10.0)), (99.0, (0.0, -10.0), (10.0, 0.0))] {
        let fills = [
            buy(1, 10.0, p1),
            Fill { t: 1, participant: "seller".into(), side: Side::Sell, qty: 10.0, price: p1 },
        ];
        for f in [Formulation::Simple, Formulation::Complex] {
            let a = zero_sum_audit(&fills, &[100.0, p1], f).unwrap();
            assert!(a.passed);
            assert_eq!(a.total, 0.0);
            let b = &a.participants[0].report;
            let s = &a.participants[1].report;
            assert_eq!((b.impact, b.timing), buyer);
            assert_eq!((s.impact, s.timing), seller);
        }
    }
}

#[test]
fn unbalanced_and_malformed_inputs() {
    let f = [buy(2, 10.0, 101.0)];
    assert!(matches!(zero_sum_audit(&f, &[100.0, 100.0, 101.0], Formulation::Simple), Err(Error::Unbalanced { interval: 2, .. })));
    let c = ctx(&[100.0, 101.0], 10.0);
    assert!(shortfall(&c, &[buy(2, 10.0, 101.0)]).is_err());
    let mixed = [buy(1, 5.0, 101.0), Fill { t: 1, participant: "buyer".into(), side: Side::Sell, qty: 5.0, price: 101.0 }];
    assert!(shortfall(&c, &mixed).is_err());
    let bad = OrderContext { arrival_price: 100.0, total_shares: 10.0, horizon: 2, price_path: vec![100.0, 101.0] };
    assert!(shortfall(&bad, &[buy(1, 10.0, 101.0)]).is_err());
}

#[test]
fn new_levels_measure_never_exceeds_steps() {
    let path = [100.0, 101.0, 100.0, 101.5, 101.0, 102.0];
    let c = ctx(&path, 5.0);
    let f = fills_on(&path, &[1.0; 5]);
    let steps = impact_simple(&c, &f).unwrap();
    let levels = impact_simple_with(&c, &f, ImpactMeasure::NewLevels).unwrap();
    assert_eq!(steps, 3.5);
    assert_eq!(levels, 2.0);
    let r = attribute_with(&c, &f, Formulation::Complex, ImpactMeasure::NewLevels).unwrap();
    assert_eq!(r.timing, r.shortfall - r.impact);
}

/// Balanced fill sets: per interval, buyers' total equals sellers' total,
/// each participant on one side, trading at the interval price.
fn balanced() -> impl Strategy<Value = (Vec<f64>, Vec<Fill>)> {
    (1usize..6, 2usize..5).prop_flat_map(|(t_max, n)| {
        let path = prop::collection::vec(-2.0f64..2.0, t_max);
        let sides = prop::collection::vec(any::<bool>(), n);
        let qty = prop::collection::vec(prop::collection::vec(0.0f64..100.0, n), t_max);
        (path, sides, qty)
    })
    .prop_map(|(steps, mut sides, qty)| {
        sides[0] = true;
        let last = sides.len() - 1;
        sides[last] = false;
        let mut path = vec![100.0];
        for d in &steps {
            let p = path.last().unwrap() + d;
            path.push(p);
        }
        let mut fills = Vec::new();
        for (t, row) in qty.iter().enumerate() {
            let buy_total: f64 = row.iter().zip(&sides).filter(|(_, s)| **s).map(|(q, _)| q).sum();
            let sell_raw: f64 = row.iter().zip(&sides).filter(|(_, s)| !**s).map(|(q, _)| q + 1.0).sum();
            for (i, (q, is_buy)) in row.iter().zip(&sides).enumerate() {
                let (side, qty) = if *is_buy {
                    (Side::Buy, *q)
                } else {
                    (Side::Sell, (q + 1.0) * buy_total / sell_raw)
                };
                if qty > 0.0 {
                    fills.push(Fill { t: t + 1, participant: format!("p{i}"), side, qty, price: path[t + 1] });
                }
            }
        }
        (path, fills)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn zero_sum_holds((path, fills) in balanced()) {
        prop_assume!(!fills.is_empty());
        for f in [Formulation::Simple, Formulation::Complex] {
            let a = zero_sum_audit(&fills, &path, f).unwrap();
            prop_assert!(a.passed, "total {} scale {}", a.total, a.scale);
            for p in &a.participants {
                prop_assert!(p.report.impact >= 0.0);
                prop_assert_eq!(p.report.timing, p.report.shortfall - p.report.impact);
            }
        }
    }

    #[test]
    fn shortfall_telescopes(steps in prop::collection::vec(-3.0f64..3.0, 1..8), w in prop::collection::vec(0.1f64..50.0, 8)) {
        let mut path = vec![100.0];
        for d in &steps {
            let p = path.last().unwrap() + d;
            path.push(p);
        }
        let t_max = steps.len();
        let qty = &w[..t_max];
        let total: f64 = qty.iter().sum();
        let c = ctx(&path, total);
        let f = fills_on(&path, qty);
        let direct = shortfall(&c, &f).unwrap();
        let relative: f64 = (0..t_max).map(|t| qty[t] * (path[t + 1] - path[0])).sum();
        // Σ_t W_t (P_t − P_{t−1}), with W_t the residual entering t.
        let mut nested = 0.0;
        let mut rem = total;
        for t in 1..=t_max {
            nested += rem * (path[t] - path[t - 1]);
            rem -= qty[t - 1];
        }
        let scale = total * 100.0;
        prop_assert!((direct - relative).abs() <= 1e-12 * scale);
        prop_assert!((direct - nested).abs() <= 1e-12 * scale);
    }
}
