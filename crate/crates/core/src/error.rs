use thiserror::Error;

/// Errors raised by the estimation, selection and clustering routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a mathematical precondition (dimensions, ranges, finiteness).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An item column is constant, so its difficulty is not estimable.
    #[error("item '{label}' is degenerate: all responses are {value}")]
    DegenerateItem { label: String, value: u8 },

    #[error("row {row}, column '{column}': expected 0 or 1, found '{value}'")]
    NonBinaryCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate item label '{0}'")]
    DuplicateLabel(String),

    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("input contains no {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
