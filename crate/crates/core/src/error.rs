use thiserror::Error;

/// Errors produced by the simulator and the analyses built on it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("partial trace needs a nonempty set of kept factors")]
    EmptyKeep,

    #[error("invalid factor set: {0}")]
    InvalidFactors(String),

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("projectors do not form a complete orthogonal set: {0}")]
    IncompleteMeasurement(String),

    #[error("no local cheating unitary exists: reduced states differ by {distance:.3e}")]
    NoLocalUnitary { distance: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("axis leaves the xy-plane")]
    NonXyAxis,

    #[error("particle {0} was not measured in the z basis")]
    Unmeasured(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("problem too large for exact analysis: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
