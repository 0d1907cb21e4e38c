//! Command-line driver: `simulate`, `validate`, `run`, `gridsearch`,
//! `compare` and `report`.
//!
//! Exit codes: 0 success, 2 configuration, 3 I/O, 4 data, 5 evaluation.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use bifb::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bifb::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Io => 3,
                ErrorKind::Data => 4,
                ErrorKind::Evaluation => 5,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bifb",
    version,
    about = "SSVEP recognition with bio-inspired filter banks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON). `compare` takes it more than once.
    #[arg(long = "config", global = true, value_name = "PATH")]
    pub config: Vec<PathBuf>,
    /// Override a config value, e.g. `--set segment.length_s=1.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory, overriding the config's `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from the `simulate` section.
    Simulate,
    /// Check a config and its dataset without running anything.
    Validate,
    /// Leave-one-out evaluation of one method.
    Run,
    /// Exhaustive hyperparameter search maximizing pooled ITR.
    Gridsearch,
    /// Run several configs on one dataset and test BIFB against the rest.
    Compare,
    /// Re-print reports from earlier `run` output directories.
    Report {
        #[arg(required = true, value_name = "RUN_DIR")]
        runs: Vec<PathBuf>,
    },
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
