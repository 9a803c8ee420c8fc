use thiserror::Error;

/// Errors raised by the algebra kernels, the filter designs and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is numerically singular")]
    Singular,

    #[error("matrix does not have full column rank")]
    RankDeficient,

    #[error("invalid unfolding mode {0}, expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("direction cosine {0} outside [-1, 1]")]
    CosineOutOfRange(f64),

    #[error("direction list is empty")]
    EmptyDirections,

    #[error("co-filter is identically zero")]
    ZeroCoFilter,

    #[error("filter output is identically zero")]
    DegenerateOutput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
