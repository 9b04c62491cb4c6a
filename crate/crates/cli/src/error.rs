use thiserror::Error;

/// CLI-level errors, one variant per process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed or semantically invalid configuration: exit 1.
    #[error("validation error: {0}")]
    Validation(String),

    /// The solver failed to converge somewhere acceptance requires it:
    /// exit 2.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Filesystem problems: exit 3.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Convergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<shadowopt::error::Error> for CliError {
    fn from(e: shadowopt::error::Error) -> Self {
        match &e {
            shadowopt::error::Error::NotConverged { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
