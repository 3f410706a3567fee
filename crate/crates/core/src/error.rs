use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid benchmark (config {index}): {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot encode parameter `{param}`: {reason}")]
    Encoding { param: String, reason: String },
    #[error("history violation: {0}")]
    History(String),
    #[error("empty history")]
    EmptyHistory,
    #[error("kernel matrix not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("config {config} is not a candidate: already at max budget {max_budget}")]
    NotACandidate { config: usize, max_budget: usize },
    #[error("trace does not match benchmark: {0}")]
    TraceMismatch(String),
    #[error("missing (method, dataset) pairs: {0}")]
    MissingPairs(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
