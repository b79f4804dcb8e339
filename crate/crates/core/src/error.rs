use std::path::PathBuf;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("bad magic: expected \"MDET\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error(
        "shape/data length mismatch: shape {shape:?} needs {expected} elements, found {found}"
    )]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("non-finite element at index {0}")]
    NonFinite(usize),
    #[error("dangling embedding_row {row} in {what} (tensor has {rows} rows)")]
    DanglingRow {
        what: String,
        row: usize,
        rows: usize,
    },
    #[error("duplicate concept_id {0}")]
    DuplicateConcept(u32),
    #[error("unknown concept_id {0}")]
    UnknownConcept(u32),
    #[error("unknown image_id {0:?}")]
    UnknownImage(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty modality: {0}")]
    EmptyModality(&'static str),
    #[error("invalid box [{0}, {1}, {2}, {3}]: needs x1 < x2 and y1 < y2")]
    InvalidBox(f64, f64, f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },
    #[error("infeasible world: {0}")]
    Infeasible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
