use std::path::{Path, PathBuf};

use jumplab_core::sde::SimulationError;
use jumplab_core::{AnalyzeError, ModelError, RateError};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{failed} of {total} trajectories failed; first: {first}")]
    Trajectories {
        failed: usize,
        total: usize,
        first: SimulationError,
    },
    #[error(transparent)]
    Analysis(#[from] AnalyzeError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for I/O, 2 for validation and usage, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Usage(_) | CliError::Model(_) | CliError::Rate(_) => 2,
            CliError::Simulation(_) | CliError::Trajectories { .. } | CliError::Analysis(_) => 3,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "invalid_config",
            CliError::Usage(_) => "usage",
            CliError::Model(e) => e.code(),
            CliError::Rate(e) => e.code(),
            CliError::Simulation(e) => e.source.code(),
            CliError::Trajectories { first, .. } => first.source.code(),
            CliError::Analysis(e) => e.code(),
        }
    }

    /// The error object written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": {
                "code": self.code(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        });
        let failure = match self {
            CliError::Simulation(e) => Some(e),
            CliError::Trajectories { first, .. } => Some(first),
            _ => None,
        };
        if let Some(e) = failure {
            v["error"]["seed"] = json!(e.seed);
            v["error"]["stream"] = json!(e.stream);
            v["error"]["time"] = json!(e.time);
        }
        v
    }
}
