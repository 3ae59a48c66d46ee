use thiserror::Error;

/// Errors surfaced by the library. Protocol-level misbehaviour (bad votes,
/// forged aggregates) is never an error: role machines discard and count it.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("empty aggregation")]
    EmptyAggregation,

    #[error("not a subset: index {0} is not set in the full aggregate")]
    NotSubset(usize),

    #[error("chunks do not partition the index space: {0}")]
    BadPartition(String),

    #[error("key count {keys} does not match bitmap popcount {popcount}")]
    KeyCountMismatch { keys: usize, popcount: usize },

    #[error("index {index} outside bitmap range [{lo}, {hi})")]
    OutOfRange { index: usize, lo: usize, hi: usize },

    #[error("overlapping contributors at index {0}")]
    Overlap(usize),

    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("unknown validator {0}")]
    UnknownValidator(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
