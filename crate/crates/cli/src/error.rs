use thiserror::Error;

use crate::config::ConfigError;

/// Everything that ends a run, mapped to an exit code by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("input error: {0}")]
    Input(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

/// Solver failures are non-convergence; anything else the core rejects is bad input.
impl From<sigmacell::Error> for CliError {
    fn from(e: sigmacell::Error) -> Self {
        match e {
            sigmacell::Error::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}
