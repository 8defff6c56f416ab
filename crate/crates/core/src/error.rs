use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input violates a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Brute-force routines refuse inputs above their size cap.
    #[error("input too large for exhaustive routine: {0}")]
    SizeCap(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid tape state: {0}")]
    State(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
