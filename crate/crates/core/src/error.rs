use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited text in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("duplicate subject id `{0}`")]
    DuplicateSubject(String),

    #[error("invalid value {value:?} at line {line}, column `{column}`: {reason}")]
    InvalidCell {
        line: u64,
        column: String,
        value: String,
        reason: &'static str,
    },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid region map: {0}")]
    InvalidRegionMap(String),

    #[error("nonpositive or non-finite intracranial volume {value} for subject `{subject}`")]
    InvalidIcv { subject: String, value: f64 },

    #[error("table has no intracranial-volume column")]
    MissingIcv,

    #[error("table has no QC column")]
    MissingQc,

    #[error("table is already normalized")]
    AlreadyNormalized,

    #[error("table is not normalized by intracranial volume")]
    NotNormalized,

    #[error("feature lists differ: {0}")]
    FeatureMismatch(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min:e}, max eigenvalue {max:e})")]
    NotPsd { min: f64, max: f64 },

    #[error("singular covariance matrix (min eigenvalue {min:e}, trace {trace:e})")]
    SingularCovariance { min: f64, trace: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bootstrap repeat {repeat} failed: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad
    /// input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotSymmetric { .. }
            | Error::NotPsd { .. }
            | Error::SingularCovariance { .. }
            | Error::Numerical(_) => true,
            Error::Repeat { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
