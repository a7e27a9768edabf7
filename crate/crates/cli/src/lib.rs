//! Command-line driver: argument parsing, configuration and the verbs.

pub mod commands;
pub mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use ensat_core::MaskMode;

/// Bad arguments or unusable input; reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "ensat", version, about = "Attention-based dynamic link prediction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Root random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Input: an edge list (`src dst time [weight]`) or a snapshot cache.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,

    /// Number of equal-width time windows for edge-list input.
    #[arg(long, global = true, value_name = "T")]
    pub snapshots: Option<usize>,

    /// Replace edge weights with 1.
    #[arg(long, global = true)]
    pub binarize: bool,

    /// Keep edge orientation.
    #[arg(long, global = true)]
    pub directed: bool,

    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Causal,
    Literal,
}

impl From<MaskArg> for MaskMode {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Causal => MaskMode::Causal,
            MaskArg::Literal => MaskMode::Literal,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an edge list into snapshots and write a snapshot cache.
    Ingest,
    /// Generate a synthetic dynamic graph as an edge list.
    Synth,
    /// Train embeddings on the history and save a checkpoint.
    Train,
    /// Score the target snapshot with a checkpoint and the baselines.
    Eval,
    /// Train and score the four architecture variants.
    Ablate,
    /// Repeat train+eval over a grid of values for one key.
    Sweep {
        /// `KEY=v1,v2,...` or `KEY=a..b` (`T` allowed as upper bound).
        #[arg(long)]
        grid: String,
        /// Runs per grid point, with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Check every gradient against finite differences.
    Gradcheck {
        #[arg(long, value_enum, default_value_t = MaskArg::Causal)]
        mask: MaskArg,
    },
}

/// Builds the effective configuration: defaults, then the file, then flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config file {}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| UsageError(format!("{}: {e:#}", path.display())))?;
    }
    for assignment in &global.overrides {
        cfg.apply(assignment).map_err(|e| UsageError(format!("{e:#}")))?;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    if let Some(data) = &global.data {
        cfg.data = Some(data.clone());
    }
    if let Some(t) = global.snapshots {
        cfg.snapshots = t;
    }
    if global.binarize {
        cfg.binarize = true;
    }
    if global.directed {
        cfg.directed = true;
    }
    Ok(cfg)
}

/// Runs a parsed command line; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve_config(&cli.global)?;
    cfg.settings().model.validate().map_err(|e| UsageError(e.to_string()))?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg)?,
        Command::Synth => commands::synth(&cfg)?,
        Command::Train => commands::train_cmd(&cfg)?,
        Command::Eval => commands::eval_cmd(&cfg)?,
        Command::Ablate => commands::ablate(&cfg)?,
        Command::Sweep { grid, repeats } => commands::sweep(&cfg, grid, *repeats).context("sweep failed")?,
        Command::Gradcheck { mask } => return commands::gradcheck(&cfg, (*mask).into()),
    }
    Ok(true)
}

/// Process exit code for an error: 2 for usage and input problems, else 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use ensat_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            if matches!(e, E::Parse { .. } | E::Config(_) | E::Format { .. } | E::Io(_)) {
                return 2;
            }
        }
    }
    1
}
