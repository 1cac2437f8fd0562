use thiserror::Error;

/// Errors raised by the engine.
///
/// Variants are grouped by the layer that detects them. Anything tagged as an
/// internal failure signals a violated mathematical invariant, i.e. a bug.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lattice error: {0}")]
    Lattice(String),

    #[error("vector {0} is not in the positive cone")]
    NotInCone(String),

    #[error("exact division failed: {0}")]
    Inexact(String),

    #[error("point {point} is not generic: it lies on the line {line}")]
    NonGeneric { point: String, line: String },

    #[error("path passes through the origin")]
    ThroughOrigin,

    #[error("malformed initial data: {0}")]
    MalformedInput(String),

    #[error("index {0} is frozen")]
    FrozenIndex(usize),

    #[error("engine limit: {0}")]
    EngineLimit(String),

    #[error("consistency check failed at order {order}: {detail}")]
    Inconsistent { order: u32, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
