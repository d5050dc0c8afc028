use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square with a power-of-two dimension >= 2, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site {site} out of range 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("operator is not Hermitian (max entrywise deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator spectrum is not contained in {{+1, -1}} (deviation {0:.3e})")]
    SpectrumNotPlusMinusOne(f64),

    #[error("hint `{hint}` does not hold (deviation {deviation:.3e})")]
    HintViolated { hint: &'static str, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration step too large: 1 - dt * sum(gamma) = {0:.3e} is not positive")]
    StepTooLarge(f64),

    #[error("{0}")]
    NotTimeReversalSymmetric(&'static str),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed CSV {path}: {message}")]
    Csv { path: String, message: String },

    #[error("empty series")]
    EmptySeries,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors caused by the user's configuration rather than by the
    /// numerics or the filesystem.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidParameter { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
