//! The `flowgen` command line: `generate`, `validate`, `eval` and `stats`.
//!
//! Exit codes are 0 on success, 1 when a run or check fails and 2 for usage
//! errors. The worker count for `generate` comes from `FLOWGEN_WORKERS`.

pub mod eval;
pub mod generate;
pub mod stats;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use flowgen_core::renderer::InpaintMode;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "FLOWGEN_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "flowgen", version, about = "Optical flow training pairs from single images with depth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate training pairs for every record of an input list.
    Generate(generate::GenerateArgs),
    /// Check the renderer against the brute-force oracle on scene specs.
    Validate(validate::ValidateArgs),
    /// Score predicted flows against ground truth.
    Eval(eval::EvalArgs),
    /// Summarize a directory of generated samples.
    Stats(stats::StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowFormat {
    Flo,
    Kitti,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InpaintArg {
    Builtin,
    Export,
}

impl From<InpaintArg> for InpaintMode {
    fn from(a: InpaintArg) -> Self {
        match a {
            InpaintArg::Builtin => InpaintMode::Builtin,
            InpaintArg::Export => InpaintMode::Export,
        }
    }
}

/// Error type shared by the subcommands; maps onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

/// Worker count from the environment; all cores when unset.
pub fn workers_from_env() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

pub(crate) fn write_json(path: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(path) = path {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate(args) => generate::run(&args),
        Command::Validate(args) => validate::run(&args),
        Command::Eval(args) => eval::run(&args),
        Command::Stats(args) => stats::run(&args),
    };
    match result {
        Ok(()) => EXIT_SUCCESS,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
