use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("simplex failed to converge: {0}")]
    NumericalBreakdown(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("all points lie at the origin of the projection plane")]
    DegenerateProjection,

    #[error("no admissible feature pair for classes ({0}, {1})")]
    NoAdmissiblePair(usize, usize),

    #[error("TooFewPoints: class {class} has {count} points, at least {needed} are required")]
    TooFewPoints {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replication {index} failed: {source}")]
    ReplicationFailed { index: usize, source: Box<Error> },

    #[error("fold {index} failed: {source}")]
    FoldFailed { index: usize, source: Box<Error> },

    #[error("model format: {0}")]
    ModelFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
