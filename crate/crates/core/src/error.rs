use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("point {0} is not mapped to any tree node")]
    UnmappedPoint(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty pair sample")]
    EmptySample,

    #[error("non-finite target distance for pair ({0}, {1})")]
    NonFiniteTarget(usize, usize),

    #[error("combined support {0} exceeds exact solver limit {1}")]
    SupportTooLarge(usize, usize),

    #[error("transport plan support contains a cycle")]
    CyclicSupport,

    #[error("transport problem is infeasible: {0}")]
    Infeasible(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("correlation undefined: reference values have zero variance")]
    ZeroVariance,

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
