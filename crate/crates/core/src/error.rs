use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("hypothesis set is empty")]
    EmptyHypotheses,
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("non-finite coordinate in {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested {requested} hypotheses but only {available} samples are available")]
    TooFewSamples { requested: usize, available: usize },
    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("zero variance in dimension {dim}; pass an explicit bandwidth")]
    ZeroVariance { dim: usize },
    #[error("density is not normalizable on the grid")]
    NotNormalizable,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
