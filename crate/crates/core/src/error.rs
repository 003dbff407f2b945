use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity {n} exceeds cap {cap} for {what}")]
    ArityCap { n: usize, cap: usize, what: &'static str },
    #[error("coordinate {i} out of range for n = {n}")]
    CoordRange { i: usize, n: usize },
    #[error("arity mismatch: expected n = {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid function spec `{spec}`: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("invalid parameter {name} = {value}: {reason}")]
    BadParameter { name: &'static str, value: f64, reason: String },
    #[error("conditional mean is zero; the conditioned step law is undefined")]
    ZeroMean,
    #[error("truth table file: {0}")]
    TableFile(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
