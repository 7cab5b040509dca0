use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Truncated state or trajectory has more population outside the kept
    /// Fock levels than the tolerance allows.
    #[error("cutoff too small: leakage {leakage:.3e} >= eps {eps:.3e}")]
    CutoffTooSmall { leakage: f64, eps: f64 },

    #[error("operator is not Hermitian (max |A - A^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("unphysical covariance matrix: {0}")]
    Unphysical(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("leakage gate: {what} leakage {leakage:.3e} >= eps {eps:.3e}")]
    LeakageGate { what: String, leakage: f64, eps: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
