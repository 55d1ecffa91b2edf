//! Error type shared by the whole pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector lengths or per-group value counts do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input is valid in shape but numerically unusable (zero vector with
    /// cosine, constant sample, zero-variance reference).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Semantically invalid data (unknown ids, non-finite scores, cross-group
    /// genuine pairs, duplicate groups).
    #[error("data error: {0}")]
    Data(String),

    /// A row in an input file does not match the schema.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Too few scores or values for an operation to be defined.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Per-batch reports do not share the same structure.
    #[error("aggregation mismatch: {0}")]
    AggregationMismatch(String),

    /// A configuration parameter is outside its documented range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, emitted on stderr by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "E_DIMENSION",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Data(_) => "E_DATA",
            Error::Parse { .. } => "E_PARSE",
            Error::InsufficientData(_) => "E_INSUFFICIENT_DATA",
            Error::AggregationMismatch(_) => "E_AGGREGATION",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::Json(_) => "E_JSON",
        }
    }
}
