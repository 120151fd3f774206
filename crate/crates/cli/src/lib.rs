//! Experiment driver for comb quantum-noise simulations.
//!
//! Each command reads a versioned JSON [`config::RunConfig`], writes its data
//! files atomically into an output directory and finishes with a
//! `manifest.json` that echoes the resolved configuration. A manifest is
//! itself a valid config, so any run can be replayed from its manifest.

pub mod commands;
pub mod config;
mod output;

use std::fmt;
use std::path::PathBuf;

pub use commands::{execute, Command, Outcome};
pub use config::{Format, RunConfig, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub(crate) fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<combnoise_core::Error> for CliError {
    fn from(e: combnoise_core::Error) -> Self {
        match e {
            combnoise_core::Error::Numeric(m) => CliError::Numeric(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}
