//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    /// A bracketed root search failed (degenerate scaling parameters).
    #[error("solver: {0}")]
    Solver(String),

    /// A simplicial complex violates a structural invariant.
    #[error("structural: {0}")]
    Structural(String),

    /// The requested combination of dimension/tuple size is not supported.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Regime classification could not reach a conclusion.
    #[error("unclassified regime: {0}")]
    Unclassified(String),

    /// A config file failed schema validation.
    #[error("config ({location}): {message}")]
    Config { location: String, message: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    /// Stable numeric code for the CLI and the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::Config { .. } => 3,
            Error::ParameterDomain(_) => 4,
            Error::Solver(_) => 5,
            Error::Io(_) | Error::Serialize(_) => 6,
            Error::Structural(_) => 7,
            Error::Unsupported(_) => 8,
            Error::Unclassified(_) => 9,
        }
    }
}
