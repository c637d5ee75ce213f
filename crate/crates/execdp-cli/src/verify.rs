//! Built-in consistency checks behind `execdp verify`.
//!
//! Each suite is a reduced, fast version of the integration tests: closed
//! forms, high-precision reference values and worked attribution paths.

#![allow(clippy::excessive_precision)]

use clap::ValueEnum;
use execdp::attribution::{attribute, impact_simple, timing, zero_sum_audit, Fill, OrderContext, Side};
use execdp::models::{Ar1Params, BenchmarkParams, MarketState};
use execdp::solver::{
    approximate_recursion, ar1_closed_form_value, ar1_quadrature_value, solve_benchmark_simple,
    solve_last_complex_stage, ArithKernel, FocMethod, Formulation, Horizon, PolicyTable, RecursionModel,
    SolverConfig,
};
use execdp::stats::{gauss_hermite, mills_psi, nln_mixture_expectation, Gaussian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kernels,
    Solvers,
    Attribution,
    ZeroSum,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Worst observed error in the check's own metric.
    pub error: f64,
    pub tolerance: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResults {
    pub suite: Suite,
    pub passed: bool,
    pub total: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

/// A balanced multi-participant fill set on a shared price path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSumFixture {
    pub price_path: Vec<f64>,
    pub fills: Vec<Fill>,
}

/// Fixtures shipped with the binary; regenerate with
/// `cargo test -p execdp-cli --test cli -- --ignored regenerate_zero_sum_fixtures`.
pub const BUNDLED_ZERO_SUM: &str = include_str!("../fixtures/zero_sum.json");

pub const FIXTURE_SEED: u64 = 20_240_607;
pub const FIXTURE_COUNT: usize = 25;

pub fn bundled_fixtures() -> Vec<ZeroSumFixture> {
    serde_json::from_str(BUNDLED_ZERO_SUM).expect("bundled fixtures parse")
}

/// Random balanced set: 1..=5 intervals, 2..=4 participants, at least one
/// buyer and one seller, each participant on a single side, sellers scaled so
/// every interval nets to zero, all trading at the interval price.
pub fn balanced_fill_set(rng: &mut ChaCha8Rng) -> ZeroSumFixture {
    let t_max = rng.random_range(1..=5usize);
    let n = rng.random_range(2..=4usize);
    let mut sides: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    sides[0] = true;
    sides[n - 1] = false;
    let mut path = vec![100.0];
    for _ in 0..t_max {
        let p = path.last().unwrap() + rng.random_range(-2.0..2.0);
        path.push(p);
    }
    let mut fills = Vec::new();
    for (t, &price) in path.iter().enumerate().skip(1) {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let buy_total: f64 = row.iter().zip(&sides).filter(|(_, s)| **s).map(|(q, _)| q).sum();
        let sell_raw: f64 = row.iter().zip(&sides).filter(|(_, s)| !**s).map(|(q, _)| q + 1.0).sum();
        for (i, (q, is_buy)) in row.iter().zip(&sides).enumerate() {
            let (side, qty) = if *is_buy { (Side::Buy, *q) } else { (Side::Sell, (q + 1.0) * buy_total / sell_raw) };
            if qty > 0.0 {
                fills.push(Fill { t, participant: format!("p{i}"), side, qty, price });
            }
        }
    }
    ZeroSumFixture { price_path: path, fills }
}

pub fn generate_fixtures(seed: u64, count: usize) -> Vec<ZeroSumFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| balanced_fill_set(&mut rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

struct Acc {
    suite: Suite,
    checks: Vec<Check>,
}

impl Acc {
    fn push(&mut self, name: &str, errors: impl IntoIterator<Item = f64>, tolerance: f64) {
        let (mut worst, mut cases, mut ok) = (0.0f64, 0, true);
        for e in errors {
            cases += 1;
            // NaN counts as failure.
            ok &= e <= tolerance;
            worst = if e.is_nan() { f64::NAN } else { worst.max(e) };
        }
        self.checks.push(Check { suite: self.suite, name: name.into(), passed: ok && cases > 0, error: worst, tolerance, cases });
    }

    fn fail(&mut self, name: &str, tolerance: f64) {
        self.checks.push(Check { suite: self.suite, name: name.into(), passed: false, error: f64::INFINITY, tolerance, cases: 0 });
    }
}

const PSI_TABLE: &[(f64, f64)] = &[
    (0.0, 0.7978845608028653558798921),
    (1.0, 1.28759997093917836122867),
    (-1.0, 0.5251352761609812090890905),
    (7.0, 7.000000000009134720408376),
    (-8.0, 0.1213681122361126806535202),
    (-30.0, 0.0332596674336770370711241),
    (-1000.0, 0.000999998000009999926000706),
];

fn kernels(acc: &mut Acc) {
    acc.push("psi_reference_table", PSI_TABLE.iter().map(|&(u, v)| mills_psi(u).map_or(f64::INFINITY, |g| rel(g, v))), 1e-12);
    let mix = [
        ((0.0, 0.2, 1.0, 0.5, -0.8), 0.5357070563308231643336055),
        ((0.1, 0.3, 2.0, 1.0, -1.0), 1.652654312178843468440581),
    ];
    acc.push(
        "mixture_expectation_reference",
        mix.iter().map(|&((mx, sx, my, sy, k), want)| {
            let x = Gaussian::new(mx, sx).unwrap();
            let y = Gaussian::new(my, sy).unwrap();
            nln_mixture_expectation(x, y, k).map_or(f64::INFINITY, |v| rel(v, want))
        }),
        1e-9,
    );
    let gh = gauss_hermite(40).map_or(f64::INFINITY, |r| rel(r.expect(0.5, 1.0, execdp::stats::psi), 1.131460396893711486237008));
    acc.push("gauss_hermite_expectation_of_psi", [gh], 1e-8);
}

fn fraction_errors(policy: &PolicyTable, probe: &[f64]) -> Vec<f64> {
    let t_max = policy.periods();
    let st = MarketState::new(100.0, 0.0);
    let mut out = Vec::new();
    for t in 1..t_max {
        let remaining = (t_max - t + 1) as f64;
        for &w in probe {
            out.push(rel(policy.trade(t, w, &st), w / remaining));
        }
    }
    out
}

fn solvers(acc: &mut Acc) {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut errs = Vec::new();
    let mut ok = true;
    for t_max in 1..=10 {
        let sigma: f64 = rng.random_range(0.2..2.0);
        let theta = 0.75 * sigma * rng.random_range(1.05..4.0);
        let h = Horizon::new(t_max, 50.0).unwrap();
        match approximate_recursion(&RecursionModel::Benchmark(BenchmarkParams { theta, sigma_eps: sigma }), Formulation::Simple, &h, &cfg) {
            Ok(p) => errs.extend(fraction_errors(&p, &cfg.w_grid(50.0))),
            Err(_) => ok = false,
        }
    }
    if ok && !errs.is_empty() {
        acc.push("benchmark_recursion_equal_split", errs, 1e-6);
    } else {
        acc.fail("benchmark_recursion_equal_split", 1e-6);
    }

    let mut errs = Vec::new();
    let mut ok = true;
    for _ in 0..5 {
        let p = Ar1Params {
            theta: rng.random_range(0.2..2.0),
            gamma: rng.random_range(0.0..1.0),
            rho: rng.random_range(-0.95..0.95),
            sigma_eps: rng.random_range(0.2..2.0),
            sigma_eta: rng.random_range(0.1..1.5),
        };
        let x0 = rng.random_range(-2.0..2.0);
        let h = Horizon::new(rng.random_range(2..=5), 20.0).unwrap();
        match approximate_recursion(&RecursionModel::Ar1 { params: p, x0 }, Formulation::Simple, &h, &cfg) {
            Ok(pol) => errs.extend(fraction_errors(&pol, &cfg.w_grid(20.0))),
            Err(_) => ok = false,
        }
    }
    if ok {
        acc.push("ar1_recursion_equal_split", errs, 1e-6);
    } else {
        acc.fail("ar1_recursion_equal_split", 1e-6);
    }

    let p = Ar1Params { theta: 1.0, gamma: 0.5, rho: 0.9, sigma_eps: 1.0, sigma_eta: 1.0 };
    acc.push("ar1_closed_form_reference", [rel(ar1_closed_form_value(&p, 0.45, 1.0, 2), 1.337500232980541441171736)], 1e-13);
    let errs: Vec<f64> = (0..10)
        .map(|_| {
            let p = Ar1Params {
                theta: rng.random_range(0.1..2.0),
                gamma: rng.random_range(0.0..1.0),
                rho: rng.random_range(-0.9..0.9),
                sigma_eps: rng.random_range(0.3..2.0),
                sigma_eta: rng.random_range(0.05..1.0),
            };
            let alpha = rng.random_range(-1.0..1.0);
            let w = rng.random_range(0.5..20.0);
            let n = rng.random_range(1..=8);
            let a = ar1_closed_form_value(&p, alpha, w, n);
            ar1_quadrature_value(&p, alpha, w, n, 40).map_or(f64::INFINITY, |b| rel(a, b))
        })
        .collect();
    acc.push("ar1_closed_form_vs_quadrature", errs, 1e-8);

    let mut frac = Vec::new();
    let mut resid = Vec::new();
    for i in 0..5 {
        let sigma: f64 = rng.random_range(0.3..2.0);
        let theta: f64 = rng.random_range(0.3..2.0);
        let alpha = if i % 2 == 0 { 0.0 } else { rng.random_range(-0.5..0.5) * sigma };
        let w = rng.random_range(2.0..20.0) * sigma / theta;
        let k = ArithKernel { theta, alpha, beta: sigma };
        let Ok(sol) = solve_last_complex_stage(&k, w, &cfg) else {
            frac.push(f64::INFINITY);
            continue;
        };
        let n = 100_000;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..=n {
            let s = w * j as f64 / n as f64;
            let v = k.last_two_objective(Formulation::Complex, w, s);
            if v < best.0 {
                best = (v, s / w);
            }
        }
        frac.push((sol.s / w - best.1).abs());
        if sol.method == FocMethod::Root {
            resid.push(sol.residual.abs() / sol.scale);
        }
    }
    acc.push("complex_foc_vs_brute_force", frac, 1e-4);
    if !resid.is_empty() {
        acc.push("complex_foc_scaled_residual", resid, 1e-8);
    }

    let h = Horizon::new(3, 10.0).unwrap();
    let warned = solve_benchmark_simple(&BenchmarkParams { theta: 0.5, sigma_eps: 1.0 }, &h, &cfg)
        .is_ok_and(|(_, p)| !p.warnings.is_empty());
    let quiet = solve_benchmark_simple(&BenchmarkParams { theta: 0.8, sigma_eps: 1.0 }, &h, &cfg)
        .is_ok_and(|(_, p)| p.warnings.is_empty());
    acc.push("convexity_warning", [if warned && quiet { 0.0 } else { 1.0 }], 0.0);
}

fn buyer_on(path: &[f64], qty: &[f64]) -> (OrderContext, Vec<Fill>) {
    let total = qty.iter().sum();
    let ctx = OrderContext { arrival_price: path[0], total_shares: total, horizon: path.len() - 1, price_path: path.to_vec() };
    let fills = qty
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(i, q)| Fill { t: i + 1, participant: "buyer".into(), side: Side::Buy, qty: *q, price: path[i + 1] })
        .collect();
    (ctx, fills)
}

fn attribution(acc: &mut Acc) {
    let cases = [([100.0, 101.0, 100.5], 10.0), ([100.0, 101.0, 102.0], 20.0), ([100.0, 100.0, 100.0], 0.0)];
    acc.push(
        "simple_impact_examples",
        cases.iter().map(|(path, want)| {
            let (c, f) = buyer_on(path, &[10.0, 10.0]);
            impact_simple(&c, &f).map_or(f64::INFINITY, |v| (v - want).abs())
        }),
        0.0,
    );
    let (c, f) = buyer_on(&[100.0, 100.5, 101.0, 101.25, 102.0], &[10.0; 4]);
    acc.push("monotone_up_complex_timing_zero", [timing(&c, &f, Formulation::Complex).map_or(f64::INFINITY, f64::abs)], 0.0);
    let path = [100.0, 101.0, 100.25, 99.5];
    let (c, f) = buyer_on(&path, &[6.0, 5.0, 9.0]);
    let want = 14.0 * (path[2] - path[1]) + 9.0 * (path[3] - path[2]);
    acc.push("dip_complex_timing", [timing(&c, &f, Formulation::Complex).map_or(f64::INFINITY, |v| (v - want).abs())], 1e-12);
    let (c, f) = buyer_on(&[100.0, 101.0], &[10.0]);
    let bps = attribute(&c, &f, Formulation::Simple).map_or(f64::INFINITY, |r| (r.shortfall_bps - 100.0).abs());
    acc.push("basis_points", [bps], 1e-12);
    let mut errs = Vec::new();
    for p1 in [101.0, 99.0] {
        let fills = [
            Fill { t: 1, participant: "buyer".into(), side: Side::Buy, qty: 10.0, price: p1 },
            Fill { t: 1, participant: "seller".into(), side: Side::Sell, qty: 10.0, price: p1 },
        ];
        for f in [Formulation::Simple, Formulation::Complex] {
            errs.push(zero_sum_audit(&fills, &[100.0, p1], f).map_or(f64::INFINITY, |a| a.total.abs()));
        }
    }
    acc.push("one_buyer_one_seller", errs, 0.0);
}

fn audit_errors(sets: &[ZeroSumFixture]) -> Vec<f64> {
    let mut out = Vec::new();
    for s in sets {
        for f in [Formulation::Simple, Formulation::Complex] {
            out.push(match zero_sum_audit(&s.fills, &s.price_path, f) {
                Ok(a) => a.total.abs() / a.scale.max(f64::MIN_POSITIVE),
                Err(_) => f64::INFINITY,
            });
        }
    }
    out
}

fn zero_sum(acc: &mut Acc) {
    acc.push("bundled_fixtures", audit_errors(&bundled_fixtures()), 1e-9);
    acc.push("generated_sets", audit_errors(&generate_fixtures(FIXTURE_SEED ^ 1, 200)), 1e-9);
}

pub fn run_suite(suite: Suite) -> VerifyResults {
    let selected: Vec<Suite> = match suite {
        Suite::All => vec![Suite::Kernels, Suite::Solvers, Suite::Attribution, Suite::ZeroSum],
        s => vec![s],
    };
    let mut checks = Vec::new();
    for s in selected {
        let mut acc = Acc { suite: s, checks: Vec::new() };
        match s {
            Suite::Kernels => kernels(&mut acc),
            Suite::Solvers => solvers(&mut acc),
            Suite::Attribution => attribution(&mut acc),
            Suite::ZeroSum => zero_sum(&mut acc),
            Suite::All => unreachable!(),
        }
        checks.extend(acc.checks);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    VerifyResults { suite, passed: failed == 0, total: checks.len(), failed, checks }
}
