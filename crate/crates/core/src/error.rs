use thiserror::Error;

/// Errors reported by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("undefined extended-real operation: {0}")]
    UndefinedArithmetic(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite coordinate in point")]
    NonFiniteCoordinate,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function is not convex: {0}")]
    NonConvex(String),

    #[error("exact subdifferential unavailable: {0}")]
    ExactnessUnavailable(String),

    #[error("point is outside the domain of the function")]
    NotInDomain,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("parameter regime too coarse: {0}")]
    ParameterRegimeTooCoarse(String),

    #[error("certificate missing: {0}")]
    CertificateMissing(String),

    #[error("tail uncontrolled: {0}")]
    TailUncontrolled(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
