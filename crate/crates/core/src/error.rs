use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("XML error: {0}")]
    Xml(String),

    #[error("duplicate identifier {0}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid identifier {0:?}")]
    InvalidId(String),

    #[error("vocabulary is empty after pruning")]
    EmptyVocabulary,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("feature {0} has zero document frequency")]
    ZeroDocumentFrequency(u32),

    #[error("jaccard distance requires binary vectors")]
    NonBinaryVector,

    #[error("candidate {0} has no features present")]
    EmptyCandidate(String),

    #[error("unrankable registration {0}: query vector is empty")]
    Unrankable(String),

    #[error("vector space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("index file: {0}")]
    IndexFormat(String),

    #[error("unknown registration {0}")]
    UnknownRegistration(String),

    #[error("benchmark {0} has no evaluable registrations")]
    EmptyBenchmark(String),
}
