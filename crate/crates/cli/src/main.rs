//! Configuration-driven experiment runner.
//!
//! Exit codes: 0 on success (blow-up is a result), 1 on I/O or internal
//! failures, 2 on configuration parse errors, 3 on validation failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Run(String),
}

impl CliError {
    /// Maps library errors: bad expressions are configuration errors,
    /// rejected inputs are validation errors, everything else is a failure.
    pub fn from_core(context: &str, e: wavewell::Error) -> Self {
        use wavewell::Error as E;
        let msg = format!("{context}: {e}");
        match e {
            E::Expression { .. } => CliError::Config(msg),
            E::Argument(_) | E::Domain(_) | E::NoRoot(_) | E::Ambiguous(_) | E::Precondition(_) | E::Construction(_) => {
                CliError::Validation(msg)
            }
            _ => CliError::Run(msg),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "wavewell", version, about = "Semilinear wave experiments: simulation, well depth and blow-up conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the well-estimation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured data and write the time series and summary.
    Simulate(Common),
    /// Estimate the potential well depth.
    Depth(Common),
    /// Classify the configured data and evaluate the blow-up conditions.
    Classify(Common),
    /// Integrate the configured scalar comparison ODE.
    VerifyOde(Common),
    /// Run the simulation over the cartesian grid of sweep parameters.
    Sweep(Common),
}

type Handler = fn(&config::ExperimentConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Depth(c) => (c, commands::depth),
        Command::Classify(c) => (c, commands::classify),
        Command::VerifyOde(c) => (c, commands::verify_ode),
        Command::Sweep(c) => (c, commands::sweep),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    }
    let mut cfg = config::ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.well.seed = s;
    }
    std::fs::create_dir_all(&common.out)?;
    f(&cfg, &common.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
