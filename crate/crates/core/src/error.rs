use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty file")]
    EmptyFile,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}, column {column}: non-binary value {value:?}")]
    NonBinary {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("line {line}: self-loop on node {node} in graph {graph}")]
    SelfLoop {
        line: usize,
        graph: String,
        node: i64,
    },

    #[error("line {line}: duplicate edge {u}-{v} in graph {graph}")]
    DuplicateEdge {
        line: usize,
        graph: String,
        u: i64,
        v: i64,
    },

    #[error("line {line}: edge references unknown node {node} in graph {graph}")]
    DanglingNode {
        line: usize,
        graph: String,
        node: i64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("statistic {statistic} cannot be applied to {miner} output")]
    KindMismatch {
        statistic: &'static str,
        miner: &'static str,
    },

    #[error("unsupported singleton: item {item} has zero frequency")]
    UnsupportedSingleton { item: u32 },

    #[error("no patterns in ensemble")]
    NoPatterns,

    #[error("pattern is not part of the original output")]
    PatternNotInOriginal,

    #[error("raw p-values are not sorted ascending at position {0}")]
    Unsorted(usize),

    #[error("non-finite statistic {0}")]
    NonFiniteStatistic(f64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
