use std::path::PathBuf;

use contactkit::{StatsError, Violation};
use serde::Serialize;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_CONFIG: i32 = 2;
    pub const CAP_EXCEEDED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration ({} violation(s))", .0.len())]
    InvalidConfig(Vec<Violation>),
    #[error("unknown experiment kind {0:?}")]
    UnknownKind(String),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Error report printed to stderr as one JSON line.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub category: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "io_read",
            CliError::Write { .. } => "io_write",
            CliError::Parse { .. } => "config_parse",
            CliError::InvalidConfig(_) | CliError::UnknownKind(_) => "invalid_config",
            CliError::ThreadPool(_) => "thread_pool",
            CliError::Stats(e) => match e {
                StatsError::InvalidConfig(_) => "invalid_config",
                StatsError::SiteOutsideBox(_) => "site_outside_box",
                StatsError::AcceptanceCapExceeded { .. } => "acceptance_cap_exceeded",
                StatsError::FitUndefined => "fit_undefined",
                _ => "statistics",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::InvalidConfig(_) | CliError::UnknownKind(_) => exit::INVALID_CONFIG,
            CliError::Stats(StatsError::InvalidConfig(_) | StatsError::SiteOutsideBox(_)) => exit::INVALID_CONFIG,
            CliError::Stats(StatsError::AcceptanceCapExceeded { .. }) => exit::CAP_EXCEEDED,
            _ => exit::FAILURE,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let violations = match self {
            CliError::InvalidConfig(v) | CliError::Stats(StatsError::InvalidConfig(v)) => v.clone(),
            _ => Vec::new(),
        };
        ErrorReport { category: self.category(), message: self.to_string(), violations }
    }
}
