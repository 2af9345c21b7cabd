//! Error taxonomy shared by all modules.
//!
//! Variants map onto process exit codes in the CLI: usage problems exit
//! with 2, everything else here exits with 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands disagree on spatial dimension.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// An argument violates a precondition (nonpositive beta, zero direction, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough data to form the requested estimate.
    #[error("data error: {0}")]
    Data(String),

    /// A configured hard cap would be exceeded.
    #[error("resource error: {0}")]
    Resource(String),

    /// A series or solve has no finite answer at this horizon.
    #[error("divergence error: {0}")]
    Divergence(String),

    /// Numeric range exceeded (overflow in a tilted sum).
    #[error("range error: {0}")]
    Range(String),

    /// The operation is not implemented for this model class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Least-squares system is ill-conditioned or otherwise unsolvable.
    #[error("fit error: {0}")]
    Fit(String),

    /// Malformed configuration or command line.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
    pub fn divergence(msg: impl Into<String>) -> Self {
        Error::Divergence(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
