use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no sessions to build an information system from")]
    NoSessions,

    #[error(
        "dwell thresholds must be at least two strictly increasing values starting at 0, got {0:?}"
    )]
    DegenerateBucketing(Vec<u64>),

    #[error("attribute subset must be non-empty")]
    EmptyAttributeSubset,

    #[error("unknown attribute {0}")]
    UnknownAttribute(usize),

    #[error("target set contains session {0} which is not in the universe")]
    TargetOutsideUniverse(usize),

    #[error("confidence cut-off must be in (0, 1], got {0}")]
    InvalidCutoff(String),

    #[error("head sequence was never observed")]
    UnseenHead,

    #[error("rule file line {line}: {reason}")]
    RuleParse { line: usize, reason: String },

    #[error("session dump line {line}: {reason}")]
    SessionParse { line: usize, reason: String },

    #[error("ip ranges {0} and {1} overlap")]
    OverlappingRanges(String, String),

    #[error("position and page size must be positive")]
    NonPositive,

    #[error("search area must be non-zero")]
    ZeroArea,

    #[error("page is not part of the listing")]
    NotInListing,
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
