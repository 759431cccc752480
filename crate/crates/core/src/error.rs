use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("working set is rank deficient (pivot {pivot:e} at row {row})")]
    RankDeficientWorkingSet { row: usize, pivot: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("region is empty")]
    EmptyRegion,

    #[error("region is unbounded")]
    UnboundedRegion,

    #[error("parameter {0:?} lies outside the parameter set")]
    ParameterOutsideTheta0(Vec<f64>),

    #[error("active-set iteration cap of {cap} exceeded")]
    IterationCapExceeded { cap: usize },

    #[error("branch-and-bound node cap of {cap} exceeded on region {path}")]
    NodeCapExceeded { cap: u64, path: String },

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("parameter {0:?} is not covered by any region of the partition")]
    NotCovered(Vec<f64>),

    #[error("operation requires a {expected}-dimensional parameter space, got {actual}")]
    UnsupportedDimension { expected: usize, actual: usize },

    #[error("unknown complexity measure `{0}`")]
    UnknownMeasure(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
