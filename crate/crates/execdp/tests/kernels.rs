//! Statistical kernels against high-precision and Monte Carlo references.
//!
//! Reference values come from scripts/oracles.py (mpmath, 30 digits) and
//! scripts/mc_oracles.py (numpy, 10^7 samples, seed 20240607).

#![allow(clippy::excessive_precision)]

use execdp::stats::*;
use execdp::Error;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

const PSI_TABLE: &[(f64, f64)] = &[
    (0.0, 0.7978845608028653558798921),
    (1.0, 1.28759997093917836122867),
    (-1.0, 0.5251352761609812090890905),
    (7.0, 7.000000000009134720408376),
    (-7.9999, 0.1213695447409165817936164),
    (-8.0, 0.1213681122361126806535202),
    (-8.0001, 0.1213666797642275451808827),
    (-12.0, 0.08221417525428432981885083),
    (-30.0, 0.0332596674336770370711241),
    (-40.0, 0.024968847207263723244871),
    (-100.0, 0.009998000999260705184902395),
    (-1000.0, 0.000999998000009999926000706),
    (3.5, 3.500872885753654735997018),
    (-3.5, 0.2513912648576997313148832),
];

#[test]
fn psi_matches_high_precision_table() {
    for &(u, want) in PSI_TABLE {
        let got = mills_psi(u).unwrap();
        assert!(rel(got, want) < 1e-12, "psi({u}) = {got}, want {want}");
    }
}

#[test]
fn psi_far_tail_follows_three_term_expansion() {
    // ψ(−x) ≈ 1/x − 2/x³ + 10/x⁵ for large x.
    for x in [30.0_f64, 50.0, 200.0] {
        let approx = 1.0 / x - 2.0 / x.powi(3) + 10.0 / x.powi(5);
        assert!(rel(psi(-x), approx) < 80.0 / x.powi(6), "x = {x}");
    }
}

#[test]
fn psi_continuous_across_branch() {
    let below = psi(-8.0 - 1e-12);
    let above = psi(-8.0 + 1e-12);
    assert!((below - above).abs() < 1e-13);
}

#[test]
fn mills_ratio_far_right_tail() {
    let got = mills_ratio(10.0);
    assert!(rel(got, 7.694598626706419346339092e-23) < 1e-12, "{got}");
}

#[test]
fn truncated_mean_scales_with_sigma() {
    assert!(rel(7.0 * psi(7.0), 49.00000000006394304285863) < 1e-15);
    let t = truncated_mean_positive(Gaussian::new(1.0, 1.0).unwrap()).unwrap();
    assert!(rel(t, 1.28759997093917836122867) < 1e-14);
    // Monte Carlo reference: 1.2879466541 ± 0.0002736.
    assert!((t - 1.2879466541).abs() < 3.0 * 0.0002736);
}

#[test]
fn gauss_hermite_expectation_of_psi() {
    let v = gauss_hermite(40).unwrap().expect(0.5, 1.0, psi);
    assert!(rel(v, 1.131460396893711486237008) < 1e-8, "{v}");
    // Monte Carlo reference: 1.131237720759717 ± 0.0001689.
    assert!((v - 1.131237720759717).abs() < 3.0 * 0.0001689);
}

#[test]
fn gauss_hermite_moments() {
    for n in [4, 12, 40, 64] {
        let r = gauss_hermite(n).unwrap();
        let m0 = r.expect(0.0, 1.0, |_| 1.0);
        let m2 = r.expect(0.0, 1.0, |z| z * z);
        let m4 = r.expect(0.0, 1.0, |z| z.powi(4));
        assert!((m0 - 1.0).abs() < 1e-13, "n={n}");
        assert!((m2 - 1.0).abs() < 1e-12, "n={n}");
        assert!((m4 - 3.0).abs() < 1e-11, "n={n}");
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }
    assert!(gauss_hermite(0).is_err());
    assert!(gauss_hermite(129).is_err());
}

#[test]
fn mixture_matches_references() {
    let cases = [
        ((0.0, 0.2, 1.0, 0.5, -0.8), 0.5357070563308231643336055, 0.6376301056496502052248977, (0.5357621584, 0.0001666)),
        ((0.1, 0.3, 2.0, 1.0, -1.0), 1.652654312178843468440581, 0.8443400560134388041523124, (1.6527121512, 0.0004275)),
    ];
    for ((mx, sx, my, sy, k), want, want_p, (mc, se)) in cases {
        let x = Gaussian::new(mx, sx).unwrap();
        let y = Gaussian::new(my, sy).unwrap();
        let v = nln_mixture_expectation(x, y, k).unwrap();
        let p = nln_mixture_probability(x, y, k).unwrap();
        assert!(rel(v, want) < 1e-9, "mean {v} vs {want}");
        assert!(rel(p, want_p) < 1e-9, "prob {p} vs {want_p}");
        assert!((v - mc).abs() < 3.0 * se);
    }
}

#[test]
fn split_form_is_not_the_conditional_mean() {
    let x = Gaussian::new(0.0, 0.2).unwrap();
    let y = Gaussian::new(1.0, 0.5).unwrap();
    let split = nln_mixture_split_form(x, y, -0.8).unwrap();
    let direct = nln_mixture_expectation(x, y, -0.8).unwrap();
    assert!((split - direct).abs() > 1e-3, "split {split}, direct {direct}");
}

#[test]
fn mixture_regime_errors() {
    let x = Gaussian::new(0.0, 0.2).unwrap();
    let y = Gaussian::new(1.0, 0.5).unwrap();
    assert!(matches!(nln_mixture_expectation(x, y, 0.0), Err(Error::UnsupportedRegime(_))));
    assert!(matches!(nln_mixture_expectation(x, y, 0.5), Err(Error::UnsupportedRegime(_))));
    assert!(Gaussian::new(0.0, -1.0).is_err());
    assert!(matches!(mills_psi(f64::NAN), Err(Error::Domain(_))));
}

#[test]
fn lognormal_shift_matches_closed_form() {
    // E[100e^B(1.01) − 100 | > 0]·10 with B ~ N(0, σ²).
    for (sigma, want) in [(0.1, 89.24077849911047804637973), (0.3, 297.882531678316225945074)] {
        let b = Gaussian::new(0.0, sigma).unwrap();
        let v = 10.0 * lognormal_shifted_mean(b, 101.0, -100.0).unwrap();
        assert!(rel(v, want) < 1e-12, "{v} vs {want}");
    }
}

#[test]
fn mixture_tends_to_lognormal_limit() {
    let b = Gaussian::new(0.0, 0.1).unwrap();
    let limit = lognormal_shifted_mean(b, 101.0, -100.0).unwrap();
    let near = nln_mixture_expectation(b, Gaussian::new(101.0, 1e-6).unwrap(), -100.0).unwrap();
    assert!(rel(near, limit) < 1e-6, "{near} vs {limit}");
}

proptest! {
    #[test]
    fn psi_bounds_and_monotone(u in -500.0f64..60.0, du in 1e-6f64..1.0) {
        let a = psi(u);
        let b = psi(u + du);
        prop_assert!(a > 0.0);
        prop_assert!(a >= u);
        prop_assert!(b > a);
        // ψ' ∈ (0, 1)
        prop_assert!(b - a < du * (1.0 + 1e-9));
    }

    #[test]
    fn positive_part_identity(m in -20.0f64..20.0, s in 0.01f64..10.0) {
        let (pe, p) = positive_part_moments(m, s);
        prop_assert!((0.0..=1.0).contains(&p));
        if p > 1e-300 {
            let t = truncated_mean_positive(Gaussian::new(m, s).unwrap()).unwrap();
            prop_assert!((pe / p - t).abs() <= 1e-9 * t.abs().max(1.0));
        }
    }

    #[test]
    fn mixture_exceeds_zero_and_shift(mx in -0.5f64..0.5, sx in 0.05f64..0.5, my in 0.5f64..3.0, sy in 0.1f64..2.0, k in -3.0f64..-0.1) {
        let v = nln_mixture_expectation(Gaussian::new(mx, sx).unwrap(), Gaussian::new(my, sy).unwrap(), k).unwrap();
        prop_assert!(v > 0.0);
        prop_assert!(v.is_finite());
    }
}
