use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient batches: a_n = {batches} must exceed p = {dim}")]
    InsufficientBatches { batches: usize, dim: usize },

    #[error("covariance estimate is not positive definite")]
    NotPositiveDefinite,

    #[error("process is not stationary: spectral radius {radius} >= 1")]
    NotStationary { radius: f64 },

    #[error("chain storage of {rows} rows x {dim} columns exceeds the byte budget of {budget} bytes")]
    ChainTooLarge { rows: usize, dim: usize, budget: u64 },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
