use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular: pivot {pivot:e} below tolerance at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps ({} of {dim} moduli found)", partial_moduli.len())]
    NoConvergence {
        iterations: usize,
        dim: usize,
        partial_moduli: Vec<f64>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("window length {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },

    #[error("degenerate window: state loss needs at least two propagated states (got {0})")]
    DegenerateWindow(usize),

    #[error("{segment} segment has {len} rows, fewer than the window length {min}")]
    SegmentTooShort {
        segment: &'static str,
        len: usize,
        min: usize,
    },

    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: bad header: {reason}")]
    BadHeader { line: u64, reason: String },

    #[error("line {line}, column {column}: cannot parse {cell:?} as a number")]
    NonNumericCell { line: u64, column: usize, cell: String },

    #[error("loss became non-finite at epoch {epoch}, batch {batch}; try a lower learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by malformed input data rather than numerics or usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::RaggedRow { .. }
                | Error::BadHeader { .. }
                | Error::NonNumericCell { .. }
                | Error::SegmentTooShort { .. }
                | Error::WindowTooLong { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Checkpoint(_)
        )
    }

    pub fn is_numeric_error(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::NonFinite(_)
                | Error::NonFiniteLoss { .. }
        )
    }
}
