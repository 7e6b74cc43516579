//! `shufreg` command-line front end.
//!
//! Results go to stdout (JSON for single results, CSV for tables). Errors go
//! to stderr as `{"kind": ..., "message": ...}`. Exit codes: 0 success,
//! 1 internal or numerical failure, 2 usage error.

mod report;
mod solve;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shufreg::seed::DEFAULT_SEED;
use shufreg::Error;

#[derive(Debug, Parser)]
#[command(name = "shufreg", version, about = "Shuffled linear regression: solve, sweep and evaluate theory")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "SHUFREG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance, loaded from JSON or generated from flags.
    Solve(SolveArgs),
    /// Run a Monte Carlo grid from a TOML config.
    Sweep(SweepArgs),
    /// Closed-form MGF and its upper bounds for one cycle type.
    Mgf(MgfArgs),
    /// CSV of MGF values and bounds over every cycle type of n.
    Theory(TheoryArgs),
    /// SNR thresholds for exact and almost exact recovery.
    Thresholds(ThresholdArgs),
    /// Cross-check the fast solvers against brute force.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverName {
    Auto,
    ExactD1,
    NetSearch,
    BruteForce,
    AltMin,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance JSON (as written by --save-instance).
    #[arg(long, conflicts_with_all = ["n", "d", "snr_exp", "snr", "sigma", "seed", "beta_norm", "random_direction"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// SNR = n^c.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["snr", "sigma"])]
    snr_exp: Option<f64>,
    #[arg(long, conflicts_with = "sigma")]
    snr: Option<f64>,
    /// Noise level; 0 gives a noiseless instance.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta_norm: f64,
    /// Draw the direction of β* uniformly from the sphere instead of e_1.
    #[arg(long)]
    random_direction: bool,
    #[arg(long, value_enum, default_value_t = SolverName::Auto)]
    solver: SolverName,
    /// Cap on the δ-net cardinality bound.
    #[arg(long, default_value_t = shufreg::estimators::DEFAULT_NET_BUDGET)]
    net_budget: u64,
    #[arg(long)]
    net_radius: Option<f64>,
    #[arg(long)]
    net_delta: Option<f64>,
    /// Center the net at the true β* instead of the warm start.
    #[arg(long)]
    net_center_truth: bool,
    /// Refine the net winner by alternating minimization.
    #[arg(long)]
    net_polish: bool,
    #[arg(long, default_value_t = shufreg::estimators::DEFAULT_ALT_MIN_ITERS)]
    max_iters: u32,
    /// Start alternating minimization from the identity permutation.
    #[arg(long)]
    identity_init: bool,
    #[arg(long, default_value_t = shufreg::estimators::DEFAULT_BRUTE_FORCE_CAP)]
    bf_cap: usize,
    /// Also write the instance as JSON.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Grid config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trials.csv, summary.csv and transition.json.
    #[arg(long)]
    out: PathBuf,
    /// Progress on stderr.
    #[arg(long)]
    progress: bool,
    /// Record per-trial wall time (makes trials.csv differ between runs).
    #[arg(long)]
    timing: bool,
    /// Crossing level for transition.json.
    #[arg(long, default_value_t = 0.5)]
    level: f64,
}

#[derive(Debug, Args)]
struct MgfArgs {
    /// Cycle type as `k:count,...`, e.g. `1:3,2:1`.
    #[arg(long)]
    cycle_type: String,
    #[arg(long)]
    t: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    beta_star: Vec<f64>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    c0: f64,
    #[arg(long, default_value_t = 5.0 * std::f64::consts::SQRT_2)]
    big_c0: f64,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    beta_star: Vec<f64>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    c0: f64,
    #[arg(long, default_value_t = 5.0 * std::f64::consts::SQRT_2)]
    big_c0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeName {
    Exact,
    AlmostExact,
    Both,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ModeName::Both)]
    mode: ModeName,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 7)]
    n_max: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn emit_error(kind: &str, message: &str) {
    let doc = serde_json::json!({ "kind": kind, "message": message });
    eprintln!("{doc}");
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Mgf(a) => report::mgf(a),
        Command::Theory(a) => report::theory(a),
        Command::Thresholds(a) => report::thresholds(a),
        Command::OracleCheck(a) => report::oracle_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let message = e.render().to_string();
            emit_error("invalid-argument", message.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            emit_error(e.kind(), &e.to_string());
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
