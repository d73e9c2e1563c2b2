use thiserror::Error;

/// Errors raised by kernel construction, sampling and the statistical checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid spacing {spacing} does not resolve eps = {eps} (need spacing <= eps/4)")]
    Resolution { spacing: f64, eps: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("factorization of increment level {level} failed after {escalations} jitter escalations")]
    Factorization { level: usize, escalations: usize },

    #[error("parameters (alpha = {alpha}, beta = {beta}, d = {dim}) are outside the admissible phase: {reason}")]
    Phase {
        alpha: f64,
        beta: f64,
        dim: usize,
        reason: String,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
