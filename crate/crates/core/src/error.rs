use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DmdcError>;

#[derive(Debug, Error)]
pub enum DmdcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("truncation order: input rank p = {p} is smaller than output rank r = {r}")]
    TruncationOrder { p: usize, r: usize },

    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },

    #[error("frequency {omega} rad/sample (grid index {index}) is a pole of the system")]
    SingularFrequency { omega: f64, index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, msg: String },

    #[error("parse error at row {row}, column {col}: cannot parse {cell:?} as a finite number")]
    Parse { row: usize, col: usize, cell: String },

    #[error("length error: {0}")]
    Length(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DmdcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DmdcError::Io { path: path.into(), source }
    }
}
