//! Batch front end: `solve`, `simulate`, `attribute`, `verify`.
//!
//! Exit codes: 0 success, 2 bad input, 3 solver failure, 4 audit or
//! verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod verify;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use execdp::attribution::{attribute_with, by_participant, zero_sum_audit, AttributionReport, ImpactMeasure, OrderContext, Side};
use execdp::sim::{evaluate_policy, momentum_volatility_buckets, BucketSummary, BucketThresholds, ExecutionPolicy, SimConfig, StageEstimate, Summary};
use execdp::solver::{solve, Formulation, PolicyTable, Schedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use config::{parse_json, PolicyChoice, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "EXECDP_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: msg.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<execdp::Error> for CliError {
    fn from(e: execdp::Error) -> Self {
        use execdp::Error as E;
        let code = match e.root() {
            E::InvalidParam { .. } | E::Config(_) | E::Validation(_) => EXIT_INPUT,
            E::Unbalanced { .. } => EXIT_AUDIT,
            _ => EXIT_SOLVER,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    Simple,
    Complex,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Simple => Formulation::Simple,
            FormulationArg::Complex => Formulation::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Steps,
    NewLevels,
}

#[derive(Debug, Parser)]
#[command(name = "execdp", version, about = "Optimal execution schedules and trading-cost attribution")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal schedule and policy table.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
    },
    /// Simulate paths, execute a policy and attribute costs.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
    },
    /// Split shortfall into impact and timing; audit zero-sum across participants.
    Attribute {
        fills: PathBuf,
        context: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        formulation: FormulationArg,
        #[arg(long, value_enum, default_value = "steps")]
        impact_measure: MeasureArg,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run built-in consistency checks.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: verify::Suite,
        /// Also write the results JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the primary input file's bytes.
    pub config_digest: String,
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub library_version: String,
    pub started_at_unix: f64,
    pub finished_at_unix: f64,
    pub outputs: Vec<String>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Header carried by every JSON output, pointing back at its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub manifest: String,
    pub config_digest: String,
}

struct Run {
    command: &'static str,
    dir: PathBuf,
    started: f64,
    config_digest: String,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Run {
    /// The first input is the primary one whose digest is `config_digest`.
    fn new(command: &'static str, dir: PathBuf, inputs: &[(&Path, &[u8])]) -> Self {
        let config_digest = inputs.first().map(|(_, b)| digest(b)).unwrap_or_default();
        let inputs: BTreeMap<String, String> = inputs.iter().map(|(p, b)| (p.display().to_string(), digest(b))).collect();
        Self { command, dir, started: now(), config_digest, inputs, seed: None, outputs: Vec::new() }
    }

    fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    fn reference(&self) -> ManifestRef {
        ManifestRef { manifest: self.manifest_name(), config_digest: self.config_digest.clone() }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(self) -> Result<RunManifest, CliError> {
        let m = RunManifest {
            command: self.command.to_string(),
            config_digest: self.config_digest,
            input_digests: self.inputs,
            seed: self.seed,
            library_version: execdp::VERSION.to_string(),
            started_at_unix: self.started,
            finished_at_unix: now(),
            outputs: self.outputs,
        };
        io::write_json(&self.dir.join(format!("{}.manifest.json", self.command)), &m)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    #[serde(flatten)]
    pub source: ManifestRef,
    pub policy: PolicyTable,
}

pub fn cmd_solve(config: &Path, dir: Option<PathBuf>, formulation: Option<Formulation>) -> Result<RunManifest, CliError> {
    let bytes = io::read_bytes(config)?;
    let mut cfg = RunConfig::parse(&bytes)?;
    if let Some(f) = formulation {
        cfg.formulation = f;
    }
    cfg.validate_for_solve()?;
    let (schedule, policy) = solve(&cfg.model, cfg.formulation, &cfg.horizon, &cfg.initial_state, &cfg.solver)?;
    let mut run = Run::new("solve", out_dir(dir)?, &[(config, &bytes)]);
    let p = run.path("schedule.csv");
    io::write_schedule(&p, &schedule)?;
    let p = run.path("policy.json");
    io::write_json(&p, &PolicyOutput { source: run.reference(), policy })?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionOutput {
    #[serde(flatten)]
    pub source: ManifestRef,
    pub model: String,
    pub formulation: Formulation,
    pub seed: u64,
    pub requested_paths: usize,
    pub n_paths: usize,
    pub excluded_paths: usize,
    pub clamped_volume_paths: usize,
    pub nonpositive_price_paths: usize,
    pub schedule: Option<Schedule>,
    pub objective: f64,
    pub objective_std_error: f64,
    pub stage_objective: Vec<StageEstimate>,
    pub shortfall: Summary,
    pub impact: Summary,
    pub timing: Summary,
    pub shortfall_bps: Summary,
    pub buckets: Vec<BucketSummary>,
}

pub struct SimulateArgs {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub formulation: Option<Formulation>,
}

pub fn cmd_simulate(config: &Path, dir: Option<PathBuf>, args: SimulateArgs) -> Result<RunManifest, CliError> {
    let bytes = io::read_bytes(config)?;
    let mut cfg = RunConfig::parse(&bytes)?;
    if let Some(s) = args.seed {
        cfg.simulation.seed = s;
    }
    if let Some(n) = args.paths {
        cfg.simulation.n_paths = n;
    }
    if let Some(f) = args.formulation {
        cfg.formulation = f;
    }
    cfg.validate_for_simulation()?;
    let h = cfg.horizon;
    let (policy, schedule) = match &cfg.simulation.policy {
        PolicyChoice::Optimal => {
            cfg.validate_for_solve()?;
            let (s, table) = solve(&cfg.model, cfg.formulation, &h, &cfg.initial_state, &cfg.solver)?;
            (ExecutionPolicy::Adaptive(table), Some(s))
        }
        PolicyChoice::EqualSplit => {
            let s = Schedule::equal_split(&h);
            (ExecutionPolicy::Fixed(s.clone()), Some(s))
        }
        PolicyChoice::Fixed { trades } => {
            if trades.len() != h.periods {
                return Err(CliError::input(format!(
                    "simulation.policy.trades: expected {} entries, got {}",
                    h.periods,
                    trades.len()
                )));
            }
            let s = fixed_schedule(h.total_shares, trades)?;
            (ExecutionPolicy::Fixed(s.clone()), Some(s))
        }
    };
    let sim = SimConfig {
        model: cfg.model,
        horizon: h,
        n_paths: cfg.simulation.n_paths,
        seed: cfg.simulation.seed,
        initial_state: cfg.initial_state,
    };
    let dist = evaluate_policy(&sim, &policy, cfg.formulation)?;
    let notional = cfg.initial_state.price * h.total_shares;
    let bps: Vec<f64> = dist.shortfall.iter().map(|x| 1e4 * x / notional).collect();

    let mut run = Run::new("simulate", out_dir(dir)?, &[(config, &bytes)]);
    run.seed = Some(sim.seed);
    let out = DistributionOutput {
        source: run.reference(),
        model: cfg.model.name().to_string(),
        formulation: cfg.formulation,
        seed: sim.seed,
        requested_paths: sim.n_paths,
        n_paths: dist.n_paths,
        excluded_paths: dist.excluded_paths,
        clamped_volume_paths: dist.clamped_volume_paths,
        nonpositive_price_paths: dist.nonpositive_price_paths,
        schedule,
        objective: dist.objective,
        objective_std_error: dist.objective_std_error,
        stage_objective: dist.stage_objective.clone(),
        shortfall: dist.shortfall_summary,
        impact: dist.impact_summary,
        timing: dist.timing_summary,
        shortfall_bps: Summary::of(&bps),
        buckets: momentum_volatility_buckets(&dist.bucket_samples(), &BucketThresholds::default()),
    };
    let p = run.path("distribution.json");
    io::write_json(&p, &out)?;
    let p = run.path("paths.csv");
    io::write_paths(&p, h.periods, notional, &dist.paths)?;
    run.finish()
}

fn fixed_schedule(total: f64, trades: &[f64]) -> Result<Schedule, CliError> {
    let sum: f64 = trades.iter().sum();
    if (sum - total).abs() > 1e-9 * total.abs().max(1.0) || trades.iter().any(|s| !(*s >= 0.0)) {
        return Err(CliError::input(format!(
            "simulation.policy.trades: must be nonnegative and sum to {total}, got sum {sum}"
        )));
    }
    let s = Schedule::from_trades(total, trades);
    s.validate(total)?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantOutput {
    pub participant: String,
    pub side: Side,
    pub total_shares: f64,
    #[serde(flatten)]
    pub report: AttributionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutput {
    /// The audit always uses every adverse step, whatever the report measure.
    pub impact_measure: ImpactMeasure,
    pub total_impact: f64,
    pub total_timing: f64,
    pub total: f64,
    pub scale: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionOutput {
    #[serde(flatten)]
    pub source: ManifestRef,
    pub formulation: Formulation,
    pub impact_measure: ImpactMeasure,
    pub arrival_price: f64,
    pub participants: Vec<ParticipantOutput>,
    pub audit: Option<AuditOutput>,
}

pub fn cmd_attribute(
    fills_path: &Path,
    context_path: &Path,
    f: Formulation,
    measure: ImpactMeasure,
    dir: Option<PathBuf>,
) -> Result<RunManifest, CliError> {
    let fill_bytes = io::read_bytes(fills_path)?;
    let ctx_bytes = io::read_bytes(context_path)?;
    let ctx: OrderContext = parse_json(&ctx_bytes, "context")?;
    ctx.validate()?;
    let fills = io::parse_fills(&fill_bytes)?;
    let groups = by_participant(&fills);

    let mut participants = Vec::new();
    let mut audit = None;
    if groups.len() == 1 {
        let (name, own) = &groups[0];
        let report = attribute_with(&ctx, own, f, measure)?;
        participants.push(ParticipantOutput { participant: name.clone(), side: own[0].side, total_shares: ctx.total_shares, report });
    } else {
        let a = zero_sum_audit(&fills, &ctx.price_path, f)?;
        for (p, (_, own)) in a.participants.iter().zip(&groups) {
            let report = if measure == ImpactMeasure::Steps {
                p.report.clone()
            } else {
                let own_ctx = OrderContext { total_shares: p.total_shares, ..ctx.clone() };
                attribute_with(&own_ctx, own, f, measure)?
            };
            participants.push(ParticipantOutput {
                participant: p.participant.clone(),
                side: p.side,
                total_shares: p.total_shares,
                report,
            });
        }
        audit = Some(AuditOutput {
            impact_measure: ImpactMeasure::Steps,
            total_impact: a.total_impact,
            total_timing: a.total_timing,
            total: a.total,
            scale: a.scale,
            passed: a.passed,
        });
    }

    let mut run = Run::new("attribute", out_dir(dir)?, &[(context_path, &ctx_bytes), (fills_path, &fill_bytes)]);
    let out = AttributionOutput {
        source: run.reference(),
        formulation: f,
        impact_measure: measure,
        arrival_price: ctx.arrival_price,
        participants,
        audit: audit.clone(),
    };
    let p = run.path("report.json");
    io::write_json(&p, &out)?;
    let m = run.finish()?;
    if let Some(a) = audit {
        if !a.passed {
            return Err(CliError {
                code: EXIT_AUDIT,
                message: format!("zero-sum audit failed: total {} against scale {}", a.total, a.scale),
            });
        }
    }
    Ok(m)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    let body = move || -> Result<(), CliError> {
        match cli.command {
            Command::Solve { config, out_dir, formulation } => {
                cmd_solve(&config, out_dir, formulation.map(Into::into)).map(|_| ())
            }
            Command::Simulate { config, out_dir, seed, paths, formulation } => cmd_simulate(
                &config,
                out_dir,
                SimulateArgs { seed, paths, formulation: formulation.map(Into::into) },
            )
            .map(|_| ()),
            Command::Attribute { fills, context, formulation, impact_measure, out_dir } => {
                let m = match impact_measure {
                    MeasureArg::Steps => ImpactMeasure::Steps,
                    MeasureArg::NewLevels => ImpactMeasure::NewLevels,
                };
                cmd_attribute(&fills, &context, formulation.into(), m, out_dir).map(|_| ())
            }
            Command::Verify { suite, out } => {
                let r = verify::run_suite(suite);
                if let Some(p) = out {
                    io::write_json(&p, &r)?;
                }
                let text = serde_json::to_string_pretty(&r).expect("results serialize");
                // A closed pipe (e.g. `| head`) is not an error.
                let _ = writeln!(std::io::stdout().lock(), "{text}");
                if r.passed {
                    Ok(())
                } else {
                    Err(CliError { code: EXIT_AUDIT, message: format!("{} check(s) failed", r.failed) })
                }
            }
        }
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::input(format!("--threads: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}

/// Parses arguments, runs, reports errors on stderr, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
