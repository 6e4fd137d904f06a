//! The `rfiqkd` command line: config parsing, sweeps and CSV output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input-data error,
//! 4 when the solver failed at every grid point.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::rfi::ProtocolVariant;
pub use config::{Grid, RunConfig, SourceConfig, SweepAxis};

/// Version tag written in the first line of every CSV the tool produces.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "rfiqkd", version, about = "Key-rate bounds and sweeps for reference-frame-independent QKD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict the run to one protocol variant: six, four, three or bb84.
    #[arg(long, global = true)]
    pub variant: Option<ProtocolVariant>,
    /// Restrict the run to one frame rotation β, in radians.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Worker threads (0 for one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// C_L against e_ZZ for the equal-error channel.
    CurveC,
    /// Asymptotic single-photon key rate against e_ZZ or distance.
    RateSingle,
    /// Optimized decoy-state key rate against distance.
    RateDecoy,
    /// Estimation chain and key rate for a counts file.
    AnalyzeCounts {
        /// Counts file; overrides `counts` in the config.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Optimized decoy-state key rate at the configured channel.
    Optimize,
    /// Model counts for the configured channel and source.
    SimulateCounts {
        /// Write the expected counts instead of a Poisson sample.
        #[arg(long)]
        expected: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input data error: {0}")]
    Data(String),
    #[error("solver failed at every grid point")]
    AllSolverFailures,
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::AllSolverFailures => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(std::io::Error::other(e))
    }
}

/// Loads the config file, if any, and applies flag overrides.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = common.variant {
        cfg.variants = vec![v];
    }
    if let Some(b) = common.beta {
        cfg.betas = Grid::List(vec![b]);
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Runs one command and returns the rendered output.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    pool.install(|| match command {
        Command::CurveC => commands::curve_c(cfg),
        Command::RateSingle => commands::rate_single(cfg),
        Command::RateDecoy => commands::rate_decoy(cfg),
        Command::AnalyzeCounts { counts } => {
            let path = counts
                .clone()
                .or_else(|| cfg.counts.as_ref().map(PathBuf::from))
                .ok_or_else(|| CliError::Config("analyze-counts needs --counts or `counts` in the config".into()))?;
            commands::analyze_counts(cfg, &path)
        }
        Command::Optimize => commands::optimize(cfg),
        Command::SimulateCounts { expected } => commands::simulate_counts(cfg, *expected),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rfiqkd: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let bytes = execute(&cli.command, &cfg)?;
    match &cli.common.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
