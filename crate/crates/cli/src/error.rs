use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Model(#[from] qosgame::Error),

    /// Only raised in `--strict` mode.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("validation failed: {0} check(s) did not pass")]
    Validation(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for an infeasible scenario
    /// under `--strict`, 4 for a failed validation run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Config(_) | CliError::Model(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
