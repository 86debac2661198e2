use thiserror::Error;

/// CLI failure with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Missing, corrupt or inconsistent state (exit 3).
    #[error("{0}")]
    State(String),
    /// Anything else (exit 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::State(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<gpbo_core::Error> for CliError {
    fn from(e: gpbo_core::Error) -> Self {
        use gpbo_core::Error as E;
        match e {
            E::Validation(_) | E::Domain(_) | E::Config(_) => CliError::Usage(e.to_string()),
            E::State(_) => CliError::State(e.to_string()),
            E::Model(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
