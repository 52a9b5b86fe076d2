//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A field of a settings struct violates its invariant. The message
    /// names the offending field.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A physics precondition was violated at run time (protocol bug).
    #[error("physics precondition violated: {0}")]
    Physics(String),

    /// Configuration file could not be parsed.
    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// Configuration value carries a unit of the wrong dimension.
    #[error("unit mismatch at line {line}: {message}")]
    UnitMismatch { line: usize, message: String },

    /// Key not recognized for the section it appears in.
    #[error("unknown config key at line {line}: [{section}] {key}")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },

    #[error("truncation too small: J_max = {j_max} discards a fraction {discarded:.3e} of the partition sum (tolerance {tol:.3e})")]
    Truncation { j_max: u32, discarded: f64, tol: f64 },

    /// The comb-index fit over several repetition rates did not land on an
    /// integer slope.
    #[error("comb index ambiguous: fitted slope {slope} is {deviation:.3} away from the nearest integer (tolerance {tol})")]
    AmbiguousIndex { slope: f64, deviation: f64, tol: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn physics(msg: impl Into<String>) -> Self {
        Error::Physics(msg.into())
    }

    /// Process exit code contract: 1 for configuration problems, 2 for
    /// runtime / physics precondition violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. }
            | Error::UnitMismatch { .. }
            | Error::UnknownKey { .. }
            | Error::Invariant(_) => 1,
            _ => 2,
        }
    }
}
