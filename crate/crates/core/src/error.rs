use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for a space of {size} points")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("points {first} and {second} have identical coordinates")]
    DuplicatePoint { first: usize, second: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map {map} is undefined at point {point}: {reason}")]
    DomainViolation {
        map: String,
        point: usize,
        reason: String,
    },

    #[error("step count {n} outside 1..={n_max}")]
    StepOutOfRange { n: usize, n_max: usize },

    #[error("unknown point id {0}")]
    UnknownPoint(usize),

    #[error("need at least {needed} usable counts, found {usable}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
