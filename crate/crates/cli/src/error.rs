//! Command-line error kinds, mapped to the documented exit codes.

use thiserror::Error;

/// Validation errors exit with code 2, runtime errors with code 1.
#[derive(Debug, Error)]
pub enum CliError {
    /// The inputs (flags, config file, dataset, checkpoint) violate a
    /// documented contract.
    #[error("{0}")]
    Validation(String),
    /// The environment failed (I/O, training divergence).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<probtsf_core::CoreError> for CliError {
    fn from(e: probtsf_core::CoreError) -> Self {
        CliError::Validation(e.to_string())
    }
}
