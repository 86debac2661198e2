use thiserror::Error;

/// Errors surfaced by the optimizer library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: malformed search space, missing parameters, bad
    /// measurement shapes.
    #[error("validation error: {0}")]
    Validation(String),
    /// A value outside the mathematical domain of an operation (e.g. the log
    /// of a non-positive number).
    #[error("domain error: {0}")]
    Domain(String),
    /// Numerical failure while building the GP model.
    #[error("model error: {0}")]
    Model(String),
    /// Operation is inconsistent with the current study state.
    #[error("state error: {0}")]
    State(String),
    /// Unknown benchmark or misconfigured experiment.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
