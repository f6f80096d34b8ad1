use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("capacity exceeded: {what} needs {needed} bytes, budget is {budget}")]
    Capacity {
        what: String,
        needed: u64,
        budget: u64,
    },

    #[error("allocation of {needed} bytes for {what} failed")]
    OutOfMemory { what: String, needed: u64 },

    #[error("tensor format: {0}")]
    Format(#[from] FormatError),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Failures decoding a tensor file. Each malformed-input case is distinct.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"BMBT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("dtype mismatch: file holds code {found}, caller expected code {expected}")]
    DtypeMismatch { expected: u8, found: u8 },
    #[error("rank mismatch: file has rank {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("dimension product overflows")]
    DimOverflow,
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
