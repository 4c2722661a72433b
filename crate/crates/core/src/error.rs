use thiserror::Error;

/// Errors produced by the clustering engine and its companion layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("document `{0}` has no descriptors")]
    EmptyDocument(String),

    #[error("descriptor `{term}` appears twice in document `{doc_id}`")]
    DuplicateDescriptor { doc_id: String, term: String },

    #[error("descriptor `{term}` in document `{doc_id}` has a zero count")]
    ZeroCount { doc_id: String, term: String },

    #[error("descriptor name is empty in document `{0}`")]
    EmptyDescriptor(String),

    #[error("document id `{0}` was already ingested")]
    DuplicateDocument(String),

    #[error("node inserted with arrival index {got}, expected {expected}")]
    ArrivalOutOfOrder { expected: usize, got: usize },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label propagation did not settle after {0} passes")]
    NonTermination(usize),

    #[error("valence must be at least 2, got {0}")]
    InvalidValence(usize),

    #[error("unknown component {0}")]
    UnknownComponent(usize),

    #[error("node {0} is not a class head")]
    NotAHead(usize),

    #[error("noyaux {0:?} do not belong to a single component")]
    CrossComponentMerge(Vec<usize>),

    #[error("component {0} is invalidated")]
    InvalidatedComponent(usize),

    #[error("group label must not be empty")]
    EmptyLabel,

    #[error("reference classification is empty")]
    EmptyReference,

    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
