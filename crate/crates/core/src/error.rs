//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus ingestion, parsing, tree transforms,
/// serialization, and model operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corpus line {line}: {message}")]
    CorpusFormat { line: usize, message: String },

    #[error("duplicate pair id \"{id}\"")]
    DuplicateId { id: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("pair \"{id}\": records mix pre-assigned and missing split fields")]
    PartialSplitAssignment { id: String },

    #[error("syntax error at line {line}, column {column}: found {found}, expected {}", expected.join(" | "))]
    Syntax {
        line: usize,
        column: usize,
        found: String,
        expected: Vec<String>,
    },

    #[error("tree schema violation at {path}: {message}")]
    TreeSchema { path: String, message: String },

    #[error("rule file: {0}")]
    RuleSchema(String),

    #[error("prune rule matches the root label \"{label}\"")]
    PruneRoot { label: String },

    #[error("malformed token stream at index {index}: {message}")]
    TokenStream { index: usize, message: String },

    #[error("footprint tree id {footprint:#x} does not match tree id {tree:#x}")]
    FootprintMismatch { footprint: u64, tree: u64 },

    #[error("no coverage reports to aggregate")]
    EmptyCoverage,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("token id {id} out of vocabulary range {size}")]
    TokenIdOutOfRange { id: u32, size: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("batch of size {got} is too small; the loss needs at least 2 items")]
    BatchTooSmall { got: usize },

    #[error("training split is empty")]
    EmptySplit,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("index file: {0}")]
    IndexFile(String),

    #[error("score matrix is not square: {rows}x{cols}")]
    NonSquareScores { rows: usize, cols: usize },

    #[error("negative relevance {value} at query {query}, position {position}")]
    NegativeRelevance {
        query: usize,
        position: usize,
        value: f64,
    },

    #[error("comparison requires a uni-code baseline report")]
    MissingBaseline,

    #[error("unknown mode \"{0}\"")]
    UnknownMode(String),

    #[error("unknown method \"{0}\"")]
    UnknownMethod(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
