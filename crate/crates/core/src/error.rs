use thiserror::Error;

/// Errors raised by the estimator engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample index {index} out of range for a record of {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("a record needs at least 3 samples, got {0}")]
    TooFewSamples(usize),

    #[error("record length {got} does not match n_samples = {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("normal matrix is singular")]
    SingularMatrix,

    #[error("derivative of g is singular near A = {amplitude} (left edge of level {level})")]
    SingularDerivative { amplitude: f64, level: u64 },

    #[error("trigonometric argument {0} outside [-1, 1] beyond tolerance")]
    DomainViolation(f64),

    #[error("lambda = {lambda} and N = {n} are not coprime")]
    NotCoprime { lambda: u64, n: usize },

    #[error("Monte Carlo needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
