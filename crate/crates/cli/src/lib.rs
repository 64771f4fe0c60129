//! Command-line front-end: LOBSTER ingestion, estimator runs, proxy
//! diagnostics, MRR simulation and report tables.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use lobmrr::stats::StatsError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const RECONCILE: u8 = 2;
    pub const INSUFFICIENT_DATA: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] anyhow::Error),
    #[error("reconciliation failed: {0}")]
    Reconcile(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Reconcile(_) => exit::RECONCILE,
            CliError::InsufficientData(_) => exit::INSUFFICIENT_DATA,
        }
    }

    /// Map estimator errors: too few observations is its own exit code,
    /// everything else is an input problem.
    pub fn from_stats(context: &str, e: StatsError) -> Self {
        match e {
            StatsError::InsufficientData { .. } | StatsError::EmptyInput | StatsError::DegenerateAutocorrelation { .. } => {
                CliError::InsufficientData(format!("{context}: {e}"))
            }
            other => CliError::Input(anyhow::anyhow!("{context}: {other}")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lobmrr", version, about = "Order-book microstructure statistics and MRR simulation")]
pub struct Cli {
    /// TOML file supplying defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rebuild books from LOBSTER message files and export transaction frames.
    Ingest(IngestArgs),
    /// Sign autocorrelation, response, MRR checks and impact statistics.
    Stats(StatsArgs),
    /// Efficient-price proxy series and their diagnostics.
    Proxy(ProxyArgs),
    /// Simulate the MRR market maker.
    Simulate(SimulateArgs),
    /// Summary tables per ticker.
    Report(StatsArgs),
    /// Write a synthetic LOBSTER message/order-book pair.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    /// Tick size in dollars.
    #[arg(long)]
    pub tick: Option<f64>,
    /// Liquidity rebate in dollars per share.
    #[arg(long)]
    pub rebate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// LOBSTER message files.
    #[arg(required = true)]
    pub messages: Vec<PathBuf>,
    /// Book levels in the companion order-book files.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Session start, seconds after midnight.
    #[arg(long)]
    pub session_start: Option<f64>,
    /// Session end, seconds after midnight.
    #[arg(long)]
    pub session_end: Option<f64>,
    /// Reconcile against the companion order-book file after every event.
    #[arg(long)]
    pub reconcile: bool,
    /// Fail on decreasing timestamps instead of warning.
    #[arg(long)]
    pub strict_time: bool,
    /// Mismatching rows tolerated per file before exiting with code 2.
    #[arg(long, default_value_t = 0)]
    pub max_mismatch: usize,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Frame files (csv or json); files of one ticker are pooled as days.
    #[arg(required = true)]
    pub frames: Vec<PathBuf>,
    /// Largest lag reported.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Imbalance bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Horizon standing in for an infinite lag.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct ProxyArgs {
    #[arg(required = true)]
    pub frames: Vec<PathBuf>,
    /// squared, linear, vwap or mid.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// continuous or discrete.
    #[arg(long)]
    pub mode: Option<String>,
    /// Markov sign persistence; 0 gives iid signs.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Permanent impact per unit surprise.
    #[arg(long = "G", alias = "g")]
    pub g: Option<f64>,
    /// News standard deviation.
    #[arg(long)]
    pub wsigma: Option<f64>,
    /// Probability that the next sign copies the news sign.
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p0: Option<f64>,
    /// Also write the latent price, predictor and news series.
    #[arg(long)]
    pub truth: bool,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub ticker: Option<String>,
    /// Trading date, YYYY-MM-DD.
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => config::FileConfig::load(p)?,
        None => config::FileConfig::default(),
    };
    let common = config::Common::resolve(&cli, &file)?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&common, &file, a),
        Command::Stats(a) => commands::stats(&common, &file, a),
        Command::Proxy(a) => commands::proxy(&common, &file, a),
        Command::Simulate(a) => commands::simulate(&common, &file, a),
        Command::Report(a) => commands::report(&common, &file, a),
        Command::Synth(a) => commands::synth(&common, &file, a),
    }
}
