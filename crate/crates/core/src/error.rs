//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("retry budget of {budget} exhausted while {context}")]
    RetryExhausted { budget: usize, context: String },
    #[error("ground truth has zero edges; metric undefined")]
    ZeroTrueEdges,
    #[error("ground truth has a single class; metric undefined")]
    SingleClassTruth,
    #[error("zero power in {0}")]
    ZeroPower(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("variable {0} is fully masked")]
    FullyMasked(usize),
    #[error("bisection cannot bracket the target rate")]
    BisectionBracket,
    #[error("linear system is singular; increase lambda")]
    SingularSystem,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("unknown violation id `{0}`")]
    UnknownViolation(String),
    #[error("conflicting violations `{0}` and `{1}`")]
    ConflictingViolations(String, String),
    #[error("exogenous pool exhausted (need {need}, have {have})")]
    PoolExhausted { need: usize, have: usize },
    #[error("cholesky factorization failed after jitter escalation")]
    CholeskyFailed,
    #[error("config error: {0}")]
    Config(String),
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
