use thiserror::Error;

/// Errors raised by the optimization engine and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid run config: {0}")]
    InvalidRunConfig(String),

    #[error("surrogate fit failed: {0}")]
    Surrogate(String),

    #[error("gate requires at least one observation")]
    NoIncumbent,

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
