//! `sigpat`: significance testing for patterns reported by mining algorithms.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigpat_core::significance::PValueMethod;
use sigpat_core::synthetic::Algorithm;
use sigpat_core::{MinerKind, RandomizerKind, StatisticKind, TransactionFormat};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flag values or combinations; exit status 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sigpat_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sigpat",
    version,
    about = "Empirical p-values and FWER control for mined patterns"
)]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SIGPAT_THREADS")]
    pub threads: Option<usize>,
    /// Output file (directory for `randomize`). Defaults to stdout where possible.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write randomized copies of a dataset.
    Randomize(RandomizeArgs),
    /// Mine patterns and score them.
    Mine(MineArgs),
    /// Mine, randomize, and report which patterns are significant.
    Test(TestArgs),
    /// Empirical minP check of a pipeline; writes the curve as CSV.
    MinpCheck(MinpArgs),
    /// Synthetic Gaussian experiments; writes one CSV row per alpha.
    Synth(SynthArgs),
    /// Monte Carlo estimate for the adversarial mixture at t = 3/5.
    Adversarial(AdversarialArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input dataset.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// `item-list` or `dense-csv` (binary data only).
    #[arg(long, default_value = "item-list")]
    pub format: TransactionFormat,
}

#[derive(Debug, Args)]
pub struct MinerArgs {
    /// `itemsets` or `rules`.
    #[arg(long)]
    pub miner: MinerKind,
    /// Absolute support threshold.
    #[arg(long)]
    pub min_support: usize,
    /// Smallest itemset size reported.
    #[arg(long, default_value_t = 1)]
    pub min_size: usize,
    /// `frequency`, `lift` (itemsets) or `fisher` (rules).
    #[arg(long)]
    pub stat: StatisticKind,
}

#[derive(Debug, Args)]
pub struct RandomizerArgs {
    /// `col` or `swap`.
    #[arg(long)]
    pub randomizer: RandomizerKind,
    /// Swap attempts per dataset (default: 4 per one-entry).
    #[arg(long)]
    pub attempts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RandomizeArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Ignored for `graph`.
    #[arg(long, default_value = "item-list")]
    pub format: TransactionFormat,
    /// `col`, `swap` or `graph`.
    #[arg(long)]
    pub method: RandomizerKind,
    #[arg(long)]
    pub n: usize,
    /// Swap attempts (per dataset for `swap`, per graph for `graph`).
    #[arg(long)]
    pub attempts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub miner: MinerArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(
        long = "in",
        value_name = "FILE",
        required_unless_present = "external",
        conflicts_with = "external"
    )]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "item-list")]
    pub format: TransactionFormat,
    #[arg(long, required_unless_present = "external")]
    pub miner: Option<MinerKind>,
    #[arg(long, required_unless_present = "external")]
    pub min_support: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_size: usize,
    #[arg(long, required_unless_present = "external")]
    pub stat: Option<StatisticKind>,
    #[arg(long, required_unless_present = "external")]
    pub randomizer: Option<RandomizerKind>,
    #[arg(long)]
    pub attempts: Option<usize>,
    /// Number of randomized datasets.
    #[arg(long, required_unless_present = "external")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// `sample`, `pool` or `both`.
    #[arg(long, default_value = "sample")]
    pub method: PValueMethod,
    /// Externally mined output on the original data: JSON list of
    /// `{id, statistic}` or `{id, nodes, support}`.
    #[arg(long, value_name = "JSON", requires = "external_null")]
    pub external: Option<PathBuf>,
    /// Externally mined outputs on the randomized datasets, one file each.
    #[arg(long, value_name = "JSON", num_args = 1.., requires = "external")]
    pub external_null: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MinpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub miner: MinerArgs,
    #[command(flatten)]
    pub randomizer: RandomizerArgs,
    /// Total randomized datasets (even); half are used as the reference.
    #[arg(long)]
    pub n: usize,
    /// Which p-value curve to write: `sample` or `pool`.
    #[arg(long, default_value = "sample")]
    pub method: PValueMethod,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `ge1`, `max10` or `rnd10`.
    #[arg(long)]
    pub alg: Algorithm,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Null coordinates (default: all of them).
    #[arg(long)]
    pub m0: Option<usize>,
    /// Mean of the non-null coordinates.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub alt_mean: f64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    /// Null datasets per run.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "both")]
    pub method: PValueMethod,
}

#[derive(Debug, Args)]
pub struct AdversarialArgs {
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must be in (0, 1), got {a}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
