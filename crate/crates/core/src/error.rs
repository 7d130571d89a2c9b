use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("negative value {value} at index {index}")]
    Negative { index: usize, value: f64 },

    #[error("weight vector is identically zero")]
    ZeroWeights,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("log-weights are not sorted non-increasing at index {index}")]
    Unsorted { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("oracle answer dimension {actual} does not match resource count {expected}")]
    OracleDimension { expected: usize, actual: usize },

    #[error("oracle answer has infinity-norm {norm} > 1 (bounded-domain solver)")]
    DomainViolation { norm: f64 },

    #[error("customer `{customer}` returned non-positive cost {cost} although it is not trivial")]
    NonPositiveCost { customer: String, cost: f64 },

    #[error("non-finite step size at iteration {iteration}")]
    NonFiniteStep { iteration: u64 },

    #[error("iteration {iteration} is not present in the run log")]
    MissingRecord { iteration: u64 },

    #[error("problem too large for the reference solver: {0}")]
    TooLarge(String),

    #[error("reference solver did not converge: {0}")]
    NotConverged(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("binary search could not conclude at level {level}: {detail}")]
    SearchExhausted { level: usize, detail: String },

    #[error("instance error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that every entry is finite and nonnegative.
pub(crate) fn check_nonnegative(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::Negative { index, value });
        }
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
