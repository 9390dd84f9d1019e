//! Command-line surface over the coverage-distribution library: calibration
//! planning, exact and limiting coverage laws, the Monte Carlo harness, and
//! CSV-based conformal prediction.
//!
//! Exit codes: 0 on success, 1 for usage or validation problems, 2 for
//! domain outcomes (no qualifying plan, degenerate calibration, nonpositive
//! dispersion).

mod commands;
mod data;

use clap::{Parser, Subcommand, ValueEnum};
use covplan_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "covplan", version, about = "Split conformal prediction with exact coverage laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest calibration size n whose limiting coverage concentrates in
    /// (1-alpha-epsilon, 1-alpha+epsilon] with probability at least gamma
    Plan {
        /// Nominal miscoverage level, in (0, 1)
        #[arg(long)]
        alpha: f64,
        /// Half-width of the coverage window around 1-alpha
        #[arg(long)]
        epsilon: f64,
        /// Required concentration probability, in (0, 1)
        #[arg(long)]
        gamma: f64,
        /// Upper end of the scan; exceeding it exits with code 2
        #[arg(long, default_value_t = 1_000_000)]
        n_max: u64,
    },
    /// Exact law of the coverage of the next m predictions, as CSV
    /// (columns k, coverage, probability)
    Pmf {
        /// Calibration sample size
        #[arg(long)]
        n: u64,
        /// Nominal miscoverage level, in (0, 1)
        #[arg(long)]
        alpha: f64,
        /// Horizon: number of future predictions
        #[arg(long)]
        m: u64,
        /// Output CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limiting Beta law of the coverage, as JSON with moments and CDF values
    Limit {
        /// Calibration sample size
        #[arg(long)]
        n: u64,
        /// Nominal miscoverage level, in (0, 1)
        #[arg(long)]
        alpha: f64,
        /// CDF evaluation point; repeatable. Defaults to the decile grid
        #[arg(long = "t")]
        t: Vec<f64>,
    },
    /// Monte Carlo replications of the split-conformal pipeline on the
    /// Friedman process; per-replication coverages as CSV, summary as JSON
    Simulate {
        /// Training sample size per replication
        #[arg(long)]
        r: usize,
        /// Calibration sample size per replication
        #[arg(long)]
        n: usize,
        /// Future horizon per replication
        #[arg(long)]
        m: usize,
        /// Nominal miscoverage level, in (0, 1)
        #[arg(long)]
        alpha: f64,
        /// Number of replications
        #[arg(long)]
        reps: usize,
        /// Master seed; replication i draws from stream i of this seed
        #[arg(long)]
        seed: u64,
        /// Conformity score; cqr fits k-NN quantile bands at alpha/2 and
        /// 1-alpha/2 and ignores --model
        #[arg(long, value_enum, default_value_t = ScoreKind::Standard)]
        scorer: ScoreKind,
        /// Point predictor behind standard and locally-weighted scores
        #[arg(long, value_enum, default_value_t = ModelKind::Knn)]
        model: ModelKind,
        /// Neighbor count for k-NN models
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Per-replication coverage CSV path; omitted = summary only
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit on train, calibrate on calib, write one prediction interval per
    /// test row (columns lower, upper, and covered when test has y)
    Predict {
        /// Training CSV (columns x1..xd, y)
        #[arg(long)]
        train: PathBuf,
        /// Calibration CSV (columns x1..xd, y)
        #[arg(long)]
        calib: PathBuf,
        /// Test CSV (columns x1..xd, optionally y)
        #[arg(long)]
        test: PathBuf,
        /// Nominal miscoverage level, in (0, 1)
        #[arg(long)]
        alpha: f64,
        /// Conformity score; cqr fits k-NN quantile bands at alpha/2 and
        /// 1-alpha/2 and ignores --model
        #[arg(long, value_enum, default_value_t = ScoreKind::Standard)]
        scorer: ScoreKind,
        /// Point predictor behind standard and locally-weighted scores
        #[arg(long, value_enum, default_value_t = ModelKind::Knn)]
        model: ModelKind,
        /// Neighbor count for k-NN models
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Output CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScoreKind {
    Standard,
    LocallyWeighted,
    Cqr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Constant,
    Knn,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for domain outcomes the caller may want to branch on, 1 otherwise.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                Error::PlanNotFound { .. }
                | Error::DegenerateCalibration { .. }
                | Error::DispersionNotPositive { .. },
            ) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; everything else clap
            // reports is a usage error.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Plan { alpha, epsilon, gamma, n_max } => {
            commands::plan(alpha, epsilon, gamma, n_max)
        }
        Command::Pmf { n, alpha, m, out } => commands::pmf(n, alpha, m, out.as_deref()),
        Command::Limit { n, alpha, t } => commands::limit(n, alpha, &t),
        Command::Simulate { r, n, m, alpha, reps, seed, scorer, model, k, out } => {
            commands::simulate(r, n, m, alpha, reps, seed, scorer, model, k, out.as_deref())
        }
        Command::Predict { train, calib, test, alpha, scorer, model, k, out } => {
            commands::predict(&train, &calib, &test, alpha, scorer, model, k, out.as_deref())
        }
    }
}
