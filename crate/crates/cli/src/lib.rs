//! Command-line front end: configuration and command dispatch.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::Outcome;
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("trajectory file error: {0}")]
    Format(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    pub(crate) fn output(e: impl std::fmt::Display) -> Self {
        Self::Output(e.to_string())
    }

    /// Everything except a failed verification maps to the usage/config
    /// code; verification failures are reported through [`Outcome`].
    pub fn exit_code(&self) -> u8 {
        2
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "nash-sir", version, about = "Equilibrium epidemics of the Nash SIR model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit every N-th sample (overrides `[output] stride`).
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward epidemic under the configured fixed distancing policy.
    Simulate(Common),
    /// Enumerate equilibrium epidemics.
    Equilibrium(Common),
    /// Check that a trajectory file is an equilibrium epidemic.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV to check.
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Enumerate equilibria across values of one parameter.
    Sweep(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(stride) = common.stride {
        cfg.output.stride = stride;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line, writing outputs and the report. Returns the
/// process exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let (cfg, outcome) = match &cli.command {
        Command::Simulate(c) => {
            let cfg = load(c)?;
            let o = commands::simulate(&cfg)?;
            (cfg, o)
        }
        Command::Equilibrium(c) => {
            let cfg = load(c)?;
            let o = commands::equilibrium(&cfg)?;
            (cfg, o)
        }
        Command::Verify { common, trajectory } => {
            let cfg = load(common)?;
            let o = commands::verify(&cfg, trajectory)?;
            (cfg, o)
        }
        Command::Sweep(c) => {
            let cfg = load(c)?;
            let o = commands::sweep(&cfg)?;
            (cfg, o)
        }
    };
    outcome.files.write_to(&cfg.output.dir)?;
    for line in &outcome.report {
        println!("{line}");
    }
    for name in outcome.files.names() {
        println!("wrote {}", cfg.output.dir.join(name).display());
    }
    Ok(if outcome.verification_failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
}
