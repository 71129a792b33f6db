use thiserror::Error;

use crate::config::ConfigError;

/// Process exit codes. These are a stable contract for scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Usage = 1,
    Validation = 2,
    Numeric = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("standing conditions fail: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Config(_) | CliError::Usage(_) => Exit::Usage,
            CliError::Validation(_) => Exit::Validation,
            CliError::Numeric(_) => Exit::Numeric,
        }
    }

    pub fn numeric(e: impl std::fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// Exit code for an error coming out of a command. Anything that is not a
/// [`CliError`] (I/O while writing reports, mostly) counts as usage.
pub fn exit_code(err: &anyhow::Error) -> Exit {
    err.chain()
        .find_map(|e| e.downcast_ref::<CliError>())
        .map(CliError::exit)
        .unwrap_or(Exit::Usage)
}
