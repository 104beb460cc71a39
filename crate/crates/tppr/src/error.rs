//! Crate-wide error type. Every fallible operation reports enough context to
//! act on: ingest errors carry line numbers, pipeline errors carry the stage
//! name, file-format errors carry the offending value.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {msg}")]
    MalformedRecord { line: usize, msg: String },

    #[error("line {line}: illegal event ({subject_kind}, {op}, {object_kind})")]
    IllegalTriple {
        line: usize,
        subject_kind: String,
        op: String,
        object_kind: String,
    },

    #[error("unknown node id '{0}'")]
    UnknownNode(String),

    #[error("anomaly scoring needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("no abnormal nodes: nothing to compress")]
    EmptyAbnormalSet,

    #[error("subgraph has nodes but no leaf: traversal requires a DAG")]
    NoLeaves,

    #[error("line {line}: malformed technique id '{id}'")]
    BadTechniqueId { line: usize, id: String },

    #[error("line {line}: unknown tactic '{name}'")]
    BadTactic { line: usize, name: String },

    #[error("rule {index}: {msg}")]
    BadRule { index: usize, msg: String },

    #[error("pattern file version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed pattern file: {0}")]
    MalformedPatternFile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ground-truth node set is empty")]
    EmptyGroundTruth,

    #[error("attack chain length {chain} exceeds technique sequence length {available}")]
    ChainTooLong { chain: usize, available: usize },

    #[error("no branch of length >= {0} in the pattern tree")]
    NoBranchLongEnough(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Attaches a file path to an I/O error.
    pub fn for_file(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::File {
            path: path.display().to_string(),
            source,
        }
    }
}
