//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "tensor quadrature budget exceeded: {nodes}^{dim} nodes is more than {budget}; \
         restrict the dimension or use Monte Carlo mode"
    )]
    TensorBudgetExceeded { dim: usize, nodes: usize, budget: usize },

    #[error("degenerate point: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("acceptance starvation: {accepted} of {trials} proposals accepted (rate {rate:.3e})")]
    Starvation { accepted: u64, trials: u64, rate: f64 },

    #[error("variance explosion: {0}")]
    VarianceExplosion(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("inapplicable sweep axis `{axis}` for experiment `{experiment}`")]
    InapplicableAxis { axis: String, experiment: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
