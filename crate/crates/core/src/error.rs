//! Crate-wide error type.

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument was outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A kernel with no mass cannot be normalized.
    #[error("degenerate kernel: every level is zero")]
    DegenerateKernel,

    /// A caller broke an API contract (e.g. passed an unnormalized kernel).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The tabulated covariance is inconsistent with the closed form.
    #[error("tabulation error: {0}")]
    Tabulation(String),

    /// Variogram fitting could not produce a model.
    #[error("fit failed: {0}")]
    Fit(String),

    /// The kriging system could not be solved.
    #[error("singular kriging system: {0}")]
    Singular(String),

    /// A CSV record could not be parsed; `line` is 1-based.
    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    /// A model file could not be parsed; `line` is 1-based.
    #[error("model file error at line {line}: {msg}")]
    ModelFile { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
