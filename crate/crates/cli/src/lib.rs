//! Configuration, command implementations and figure output for `cavitate`.

pub mod app;
pub mod config;
pub mod svg;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(cavitation::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<cavitation::Error> for AppError {
    fn from(e: cavitation::Error) -> Self {
        match e {
            cavitation::Error::Config(msg) => AppError::Config(msg),
            other => AppError::Solver(other),
        }
    }
}

impl AppError {
    /// 2 for configuration problems, 1 for everything the solver reports.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            _ => 1,
        }
    }
}
