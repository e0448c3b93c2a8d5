//! `posbias` command-line tool.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies the
//! command-line overrides, writes the resolved config to
//! `<out>/resolved.toml` and then runs. Exit codes: 0 success, 1 config or
//! usage error, 2 numerical or run failure, 3 verification suite failure.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "posbias", version, about = "Masked attention rollouts, bound checks and retrieval experiments")]
pub struct Cli {
    /// TOML config for the subcommand; defaults apply to absent keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Concurrent runs for `experiment`.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random attention stacks: rollout traces and convergence reports.
    Rollout(RolloutArgs),
    /// Run the bound and critical-point suites.
    Verify(VerifyArgs),
    /// Attention-sink scores of a checkpoint or of random stacks.
    Sinks(CheckpointArgs),
    /// Write synthetic sequences as binary records.
    Datagen,
    /// Train one model and write its log and checkpoint.
    Train,
    /// Gap and position evaluation of a checkpoint.
    Eval(CheckpointArgs),
    /// Multi-seed sweep with aggregate tables.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Mask kinds, comma separated (`causal`, `window:w=4`, `prefix:k=2`, `complete`).
    #[arg(long, value_delimiter = ',')]
    pub mask: Vec<String>,
    /// Encodings, comma separated (`nope`, `sin`, `decay:m=0.5`, `rope:base=10000`).
    #[arg(long, value_delimiter = ',')]
    pub pe: Vec<String>,
    /// Tokens.
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedding width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Layers per stack.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of random stacks per mask and encoding.
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Only these suites, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub suite: Vec<String>,
    /// Depth grid of the critical-point suite.
    #[arg(long, value_delimiter = ',')]
    pub grid_t: Vec<u64>,
    /// Deliberately corrupt one suite's input to exercise the failure path.
    #[arg(long)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckpointArgs {
    /// Checkpoint manifest (`params.json`); the blob is the sibling `.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Reuse runs whose stored result matches the resolved spec.
    #[arg(long)]
    pub resume: bool,
    /// Per-run directory tree; defaults to `<out>/runs`.
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Suite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Suite(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "run failed: {m}"),
            CliError::Suite(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<posbias_core::Error> for CliError {
    fn from(e: posbias_core::Error) -> Self {
        use posbias_core::Error as E;
        match e {
            E::InvalidMask(_) | E::InvalidPe(_) | E::OddDimension(_) | E::InvalidArgument(_) | E::PositionOutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<posbias_train::Error> for CliError {
    fn from(e: posbias_train::Error) -> Self {
        use posbias_train::Error as E;
        match e {
            E::Core(c) => c.into(),
            E::DataConfig(_) | E::ModelConfig(_) | E::UnknownClass { .. } | E::Checkpoint(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numeric(format!("json: {e}"))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(&cli)
}
