use thiserror::Error;

use crate::types::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("feature `{name}` (column {index}) has zero variance")]
    ConstantColumn { name: String, index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("external model failure: {0}")]
    ExternalModelFailure(String),

    #[error("model returned a non-finite value {value} at x = {x:?}")]
    NonFiniteOutput { value: f64, x: Vec<f64> },

    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("kernel weights underflowed to zero (test point too far from every holdout point)")]
    DegenerateWeights,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("LC iterates diverged at iteration {iteration}; lower the learning rate")]
    Diverged { iteration: usize },

    #[error("exact Shapley enumeration supports at most 20 features, got {features}")]
    ExactTooLarge { features: usize },

    #[error("background distribution is empty")]
    EmptyBackground,

    #[error("invalid dataset: {0}")]
    InvalidDataset(ValidationReport),

    #[error("invalid model spec `{spec}`: {reason}")]
    InvalidModelSpec { spec: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True when the error originates from the model rather than the caller's data.
    pub fn is_model_failure(&self) -> bool {
        match self {
            Error::ExternalModelFailure(_) | Error::NonFiniteOutput { .. } => true,
            Error::AtRow { source, .. } => source.is_model_failure(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
