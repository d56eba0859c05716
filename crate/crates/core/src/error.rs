use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {msg}")]
    Parse {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate verse id {verse_id} in {origin}")]
    DuplicateVerse { origin: String, verse_id: String },

    #[error("invalid language metadata: {0}")]
    Metadata(String),

    #[error("unknown language code {0}")]
    UnknownLanguage(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("pivot {0:?} does not occur in the source corpus")]
    PivotAbsent(String),

    #[error("association undefined: zero marginal in table {0:?}")]
    ZeroMarginal([u64; 4]),

    #[error("dependency annotation: {0}")]
    Dependency(String),

    #[error("embedding: {0}")]
    Embedding(String),

    #[error("kriging: {0}")]
    Kriging(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("invalid configuration value for `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
