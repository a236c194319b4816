use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate interval ({lo}, {hi}]: zero probability mass")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("truncation order {0} exceeds the supported maximum of 50")]
    TruncationOrder(usize),

    #[error("autoregression is not causal; roots inside or on the unit circle: {roots:?}")]
    NonCausal { roots: Vec<(f64, f64)> },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("prediction system singular at time {time}: {source}")]
    PredictionSystem {
        time: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
