//! Monte Carlo harness: reproducibility, closed-form agreement, brute force.

#![allow(clippy::excessive_precision)]

use execdp::models::{Ar1Params, BenchmarkParams, LiquidityParams, MarketState, ModelParams};
use execdp::sim::*;
use execdp::solver::{
    solve_benchmark_complex, solve_last_complex_stage, ArithKernel, Formulation, Horizon, Schedule, SolverConfig,
};

fn bench_cfg(theta: f64, sigma: f64, periods: usize, total: f64, paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        model: ModelParams::Benchmark(BenchmarkParams { theta, sigma_eps: sigma }),
        horizon: Horizon::new(periods, total).unwrap(),
        n_paths: paths,
        seed,
        initial_state: MarketState::new(100.0, 0.0),
    }
}

fn run_with_threads(n: usize, cfg: &SimConfig, policy: &ExecutionPolicy) -> CostDistribution {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    pool.install(|| evaluate_policy(cfg, policy, Formulation::Complex).unwrap())
}

#[test]
fn identical_across_thread_counts() {
    let cfg = bench_cfg(0.05, 1.0, 5, 50.0, 2_000, 42);
    let (_, table) = solve_benchmark_complex(
        &BenchmarkParams { theta: 0.05, sigma_eps: 1.0 },
        &cfg.horizon,
        &SolverConfig::default(),
    )
    .unwrap();
    let policy = ExecutionPolicy::Adaptive(table);
    let a = run_with_threads(1, &cfg, &policy);
    let b = run_with_threads(8, &cfg, &policy);
    assert_eq!(a, b);
    let c = run_with_threads(3, &SimConfig { seed: 43, ..cfg.clone() }, &policy);
    assert_ne!(a.shortfall, c.shortfall);
}

#[test]
fn noiseless_costs_have_zero_spread() {
    let cfg = bench_cfg(0.2, 0.0, 4, 40.0, 100, 1);
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
    assert_eq!(d.shortfall_summary.std, 0.0);
    assert!(d.shortfall.iter().all(|v| *v == d.shortfall[0]));
}

#[test]
fn equal_split_objective_matches_closed_form() {
    let (theta, sigma, total, periods) = (0.3, 1.0, 8.0, 4);
    let cfg = bench_cfg(theta, sigma, periods, total, 1_000_000, 2024);
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
    let v = ArithKernel { theta, alpha: 0.0, beta: sigma }.equal_split_value(total, periods);
    let z = (d.objective - v) / d.objective_std_error;
    assert!(z.abs() < 3.0, "simulated {} ± {}, closed form {v}", d.objective, d.objective_std_error);
}

#[test]
fn attribution_identity_on_every_path() {
    let cfg = bench_cfg(0.1, 1.0, 6, 30.0, 500, 9);
    for f in [Formulation::Simple, Formulation::Complex] {
        let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), f).unwrap();
        for i in 0..d.n_paths {
            assert_eq!(d.timing[i], d.shortfall[i] - d.impact[i]);
            assert!(d.impact[i] >= 0.0);
        }
    }
}

#[test]
fn monotone_paths_have_no_complex_timing() {
    let cfg = bench_cfg(1.0, 1e-6, 4, 20.0, 1_000, 5);
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Complex).unwrap();
    let zero = d.timing.iter().filter(|t| t.abs() < 1e-9).count();
    assert_eq!(zero, d.n_paths);
}

#[test]
fn brute_force_two_stage_simple_is_half() {
    let cfg = bench_cfg(0.8, 1.0, 2, 10.0, 1, 0);
    let grid = 64;
    let s = brute_force_schedule(&cfg, grid, Formulation::Simple).unwrap();
    assert!((s.trades[0] / 10.0 - 0.5).abs() <= 1.0 / grid as f64 + 1e-12);
}

#[test]
fn brute_force_two_stage_complex_matches_solver() {
    let grid = 64;
    for (theta, sigma, total) in [(1.0, 1.0, 1.0), (0.5, 1.0, 12.0), (0.25, 1.0, 40.0)] {
        let cfg = bench_cfg(theta, sigma, 2, total, 1, 0);
        let s = brute_force_schedule(&cfg, grid, Formulation::Complex).unwrap();
        let sol = solve_last_complex_stage(&ArithKernel { theta, alpha: 0.0, beta: sigma }, total, &SolverConfig::default()).unwrap();
        assert!((s.trades[0] - sol.s).abs() / total <= 1.0 / grid as f64 + 1e-12, "{} vs {}", s.trades[0], sol.s);
    }
}

#[test]
fn brute_force_ar1_three_stage_simple_is_thirds() {
    let cfg = SimConfig {
        model: ModelParams::Ar1Extra(Ar1Params { theta: 0.5, gamma: 0.4, rho: 0.7, sigma_eps: 1.0, sigma_eta: 0.5 }),
        horizon: Horizon::new(3, 30.0).unwrap(),
        n_paths: 1,
        seed: 0,
        initial_state: MarketState::new(100.0, 0.0),
    };
    let grid = 60;
    let s = brute_force_schedule(&cfg, grid, Formulation::Simple).unwrap();
    for v in &s.trades {
        assert!((v / 30.0 - 1.0 / 3.0).abs() <= 1.0 / grid as f64 + 1e-12, "{:?}", s.trades);
    }
}

#[test]
fn liquidity_breaches_are_excluded_and_counted() {
    let cfg = SimConfig {
        model: ModelParams::Liquidity(LiquidityParams::new(0.0, 1e-3, 2e-4, 0.9, 0.05, 15.0)),
        horizon: Horizon::new(3, 60.0).unwrap(),
        n_paths: 400,
        seed: 3,
        initial_state: MarketState::new(50.0, 40.0),
    };
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
    assert!(d.excluded_paths > 0);
    assert_eq!(d.excluded_paths + d.n_paths, 400);
    assert_eq!(d.shortfall.len(), d.n_paths);
}

#[test]
fn summaries_recompute_from_samples() {
    let cfg = bench_cfg(0.1, 1.0, 3, 9.0, 777, 13);
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
    assert_eq!(Summary::of(&d.shortfall), d.shortfall_summary);
    let s = &d.shortfall_summary;
    assert!(s.q05 <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.q95);
    let buckets = momentum_volatility_buckets(&d.bucket_samples(), &BucketThresholds::default());
    assert_eq!(buckets.iter().map(|b| b.count).sum::<usize>(), d.n_paths);
}

#[test]
fn two_sided_paths_are_zero_sum() {
    use execdp::attribution::{zero_sum_audit, Fill, Side};
    let cfg = bench_cfg(0.1, 1.0, 4, 20.0, 200, 21);
    let d = evaluate_policy(&cfg, &ExecutionPolicy::Fixed(Schedule::equal_split(&cfg.horizon)), Formulation::Simple).unwrap();
    for p in &d.paths {
        let mut fills = Vec::new();
        for (t, s) in p.trades.iter().enumerate() {
            fills.push(Fill { t: t + 1, participant: "b".into(), side: Side::Buy, qty: *s, price: p.prices[t + 1] });
            fills.push(Fill { t: t + 1, participant: "s".into(), side: Side::Sell, qty: *s, price: p.prices[t + 1] });
        }
        for f in [Formulation::Simple, Formulation::Complex] {
            assert!(zero_sum_audit(&fills, &p.prices, f).unwrap().passed);
        }
    }
}
