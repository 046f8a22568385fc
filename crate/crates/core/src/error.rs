//! Error type shared by every module of the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A resolution was requested that the engine does not support.
    #[error("invalid resolution: mu = {0} (must be even, 2 <= mu <= 128)")]
    InvalidResolution(u32),

    /// A value to be quantized has a component outside the [-2, 2] headroom.
    #[error("component magnitude exceeds the [-2, 2] headroom")]
    RangeExceeded,

    /// More states were requested than the amplitude grid can resolve.
    #[error("{requested} states exceed the resolution bound 2^{mu}")]
    ResolutionExceeded { requested: u128, mu: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: u128, actual: u128 },

    /// Every amplitude fell below the truncation threshold.
    #[error("every amplitude fell below the resolution threshold")]
    TotalExtinction,

    #[error("not unitary: {0}")]
    NotUnitary(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("state is not representable: {0}")]
    NotRepresentable(String),

    #[error("tag value needs more than {width} bits")]
    TagOverflow { width: u32 },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("state has support outside the search domain")]
    OutsideDomain,

    #[error("program index {0} is outside the enumeration")]
    InvalidProgramIndex(String),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("tape bound of {0} cells exceeded")]
    TapeBoundExceeded(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed state dump: {0}")]
    MalformedDump(String),
}
