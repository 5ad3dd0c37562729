use thiserror::Error;

/// Errors raised by the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{kind} basis with p = {p} is rank deficient on this grid: {detail}")]
    RankDeficient {
        kind: String,
        p: usize,
        detail: String,
    },

    #[error("requested {requested} components but the covariance has numerical rank {attainable}")]
    RankExceeded { requested: usize, attainable: usize },

    #[error("ill-conditioned least squares problem: {0}")]
    Conditioning(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("frequency grid is empty")]
    EmptyGrid,

    #[error("autoregressive specification is not stationary (spectral radius {0:.6} >= 1)")]
    NonStationary(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
