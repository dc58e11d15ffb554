//! Crate-wide error type.
//!
//! Errors are grouped into the categories the CLI maps to exit codes:
//! parse errors (malformed input files), data-consistency errors
//! (structurally valid inputs that do not fit together), and config
//! errors (invalid parameter values).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("conflicting calls for {rsid} at line {line}: {first} vs {second}")]
    ConflictingCall {
        rsid: String,
        line: usize,
        first: String,
        second: String,
    },

    #[error("empty document: no data lines")]
    EmptyDocument,

    #[error("row {row}: unknown variant {value} for {phenotype}")]
    UnknownVariant {
        row: usize,
        phenotype: String,
        value: String,
    },

    #[error("duplicate individual id {0}")]
    DuplicateId(String),

    #[error("label for {0} has no matching genotype record")]
    LabelWithoutGenotype(String),

    #[error("no phenotype-matching pool candidate for profile {0}")]
    NoMatchingCandidate(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config field {field}: {msg}")]
    InvalidConfig { field: String, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Exit-code category: 2 = parse, 3 = data consistency, 4 = config,
    /// 1 = everything else (I/O and the like).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::ConflictingCall { .. }
            | Error::EmptyDocument
            | Error::UnknownVariant { .. }
            | Error::Csv(_) => 2,
            Error::DuplicateId(_)
            | Error::LabelWithoutGenotype(_)
            | Error::NoMatchingCandidate(_)
            | Error::Data(_)
            | Error::InvalidPanel(_)
            | Error::InvalidModel(_)
            | Error::DimensionMismatch { .. } => 3,
            Error::InvalidConfig { .. } => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
