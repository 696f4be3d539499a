//! Batch front end for the riskcast pipeline.
//!
//! Each subcommand reads a TOML run config (or the built-in defaults), applies
//! the command-line overrides, and writes its files under `--out` together
//! with a `manifest_<command>.json` that lists them with SHA-256 digests.
//! Apart from the manifests, every output is a deterministic function of the
//! resolved config.

mod commands;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use riskcast_core::{Backend, RunConfig};

pub use commands::{run, Context, METHODS};
pub use error::CliError;
pub use output::{OutputEntry, RunManifest};

#[derive(Debug, Clone, Parser)]
#[command(name = "riskcast", version, about = "CVaR-trained value-oriented net demand forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Risk level of the CVaR objective, in [0, 1).
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<Backend>())]
    pub backend: Option<Backend>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// With `evaluate`: also write the segment table and a cost curve at a fixed realization.
    #[arg(long, global = true)]
    pub plot_surface: bool,
    /// With `evaluate`: also write per-slot forecasts of every method for the first test days.
    #[arg(long, global = true)]
    pub profile: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the dataset, its train/test split and the fleet.
    Generate,
    /// Train the proposed model, Qua-E and Val-N and save them.
    Train,
    /// Evaluate the saved models and Sto-OPT on the test set.
    Evaluate,
    /// Retrain and evaluate over the configured beta values.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Sweep => "sweep",
        }
    }
}

impl Cli {
    /// Load the config file, apply overrides and validate.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(backend) = self.backend {
            cfg.backend = backend;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
