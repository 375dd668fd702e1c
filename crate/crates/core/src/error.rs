use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("empty column name at position {0}")]
    EmptyColumnName(usize),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?}: {reason}")]
    InvalidColumn { column: String, reason: String },
    #[error("column {column:?} has {found} values, table has {expected} rows")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("role conflict: {0}")]
    RoleConflict(String),
    #[error("target {0:?} has fewer than two observed classes")]
    DegenerateTarget(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("probability table does not sum to one (total {0})")]
    NotNormalized(f64),
    #[error("perfect separation on {0:?}: the maximum-likelihood estimate is unbounded, use fit_fine_lasso or another penalized fit instead")]
    Separation(Vec<String>),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("stratum {stratum:?} has no rows for group {group:?}")]
    MissingGroupInStratum { stratum: String, group: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_column(column: &str, reason: impl Into<String>) -> Self {
        Error::InvalidColumn {
            column: column.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
