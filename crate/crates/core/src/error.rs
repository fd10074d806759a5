use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hostname `{0}`")]
    InvalidHostname(String),

    #[error("`{0}` is a public suffix and has no registrable domain")]
    SuffixOnly(String),

    #[error("invalid cidr `{0}`: {1}")]
    InvalidCidr(String, String),

    #[error("invalid interval: first {first} is after last {last}")]
    InvalidInterval { first: String, last: String },

    #[error("query table is empty")]
    EmptyQueryTable,

    #[error("corpus needs documents of both classes")]
    SingleClassCorpus,

    #[error("training set needs at least {needed} examples of each class (rps {rps}, non-rps {non_rps})")]
    NotEnoughExamples {
        needed: usize,
        rps: usize,
        non_rps: usize,
    },

    #[error("feature vector has {got} dimensions, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("keyword set must hold exactly {expected} keywords, got {got}")]
    KeywordCount { expected: usize, got: usize },

    #[error("bundle page `{page}` failed checksum validation")]
    ChecksumMismatch { page: String },

    #[error("bundle manifest references missing file `{0}`")]
    MissingBundleFile(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    PathIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("http error: {0}")]
    Http(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn path_io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::PathIo {
            path: path.into(),
            source,
        }
    }
}
