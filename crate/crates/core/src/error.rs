use thiserror::Error;

/// Errors raised by the numerical modules and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("basis mismatch: {0} modes vs {1} modes")]
    BasisMismatch(usize, usize),

    #[error("cutoff {cutoff} outside 0..={modes}")]
    CutoffOutOfRange { cutoff: usize, modes: usize },

    #[error("non-finite state detected at t = {time}")]
    Divergence { time: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("t = {t} lies below the validity onset {onset}")]
    BelowValidity { t: f64, onset: f64 },

    #[error("time grids do not match: {0}")]
    TimeGridMismatch(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("series value at index {index} is not positive")]
    NonPositiveValue { index: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
