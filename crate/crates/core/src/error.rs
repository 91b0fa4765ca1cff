use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or component counts do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input is well-formed but violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed (singular system, no convergence, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An order invariant that must hold by construction was broken.
    #[error("invariant breach: {what} (worst violation {worst:.3e})")]
    Invariant { what: String, worst: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
