use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sampling and estimation pipeline. Wrapping
/// variants leave the cause to [`std::error::Error::source`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv")]
    Csv(#[from] csv::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node `{label}`")]
    SelfLoop { line: usize, label: String },

    #[error("edge list contains no nodes")]
    EmptyInput,

    #[error("unknown node label `{0}`")]
    UnknownLabel(String),

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid node id {id} (node count {node_count})")]
    InvalidNode { id: usize, node_count: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input")]
    Empty,

    #[error("non-positive or non-finite weight {value} at position {index}")]
    BadWeight { index: usize, value: f64 },

    #[error("length mismatch: {left} values vs {right} weights")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("reported degree {degree} below 1 at position {index}")]
    DegreeBelowOne { index: usize, degree: f64 },

    #[error("division by zero: {0}")]
    ZeroDenominator(&'static str),

    #[error("sample record does not match network: {0}")]
    RecordMismatch(String),

    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("replicate {index} failed")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
