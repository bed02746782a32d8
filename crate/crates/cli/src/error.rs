use std::process::ExitCode;

use thiserror::Error;

/// Failures that end a command, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("bound check failed: {0}")]
    Bound(String),
    #[error("oracle disagreement: {0}")]
    Oracle(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Bound(_) => 1,
            CliError::Input(_) => 2,
            CliError::Oracle(_) => 3,
        })
    }
}

impl From<carnot_core::Error> for CliError {
    fn from(e: carnot_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
