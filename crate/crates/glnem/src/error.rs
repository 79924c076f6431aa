//! Error type shared across the crate.
//!
//! Variants map onto the CLI exit codes: configuration problems exit with 2,
//! data problems with 3, and numeric failures with 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlnemError {
    /// Invalid configuration (bad key, incompatible family/link, bad counts).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// A response value outside the support of the chosen family.
    #[error("domain error: value {value} is outside the support of the {family} family")]
    Domain { family: &'static str, value: f64 },

    /// Numerically degenerate input (rank deficiency and the like).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Non-finite quantity or a numerical routine that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The sampler could not find a usable starting state.
    #[error("initialization failure: {0}")]
    InitFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl GlnemError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlnemError::Config(_) => 2,
            GlnemError::Data(_) | GlnemError::Domain { .. } => 3,
            GlnemError::Degenerate(_)
            | GlnemError::Numeric(_)
            | GlnemError::InitFailure(_) => 4,
            GlnemError::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, GlnemError>;
