use std::path::PathBuf;

use riskcast_core::benchmarks::BenchError;
use riskcast_core::data::{ConfigError, DataError};
use riskcast_core::dispatch::DispatchError;
use riskcast_core::evaluation::EvalError;
use riskcast_core::surface::SurfaceError;
use riskcast_core::train::TrainError;
use thiserror::Error;

/// Pipeline failure, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("missing artifact {}; run `riskcast train` with the same config first", .0.display())]
    MissingArtifact(PathBuf),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::MissingArtifact(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        CliError::Data(e.to_string())
    }
}

// The fleet file is part of the configuration; dispatch failures on data are not.
impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        match e {
            DispatchError::InvalidFleet(_) | DispatchError::Io { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidBeta(_) => CliError::Config(e.to_string()),
            TrainError::Lp(_) | TrainError::NonConvergence { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Train(inner) => inner.into(),
            BenchError::KTooLarge { .. } => CliError::Config(e.to_string()),
            BenchError::Lp(_) => CliError::Solver(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(inner) => inner.into(),
            EvalError::Dispatch(inner) => inner.into(),
            EvalError::InvalidBeta(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
