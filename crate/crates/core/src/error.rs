use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two points in time (or dates) were supplied in the wrong order.
    #[error("ordering error: {0}")]
    Ordering(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Query outside the range an object supports (e.g. spline extrapolation).
    #[error("range error: {0}")]
    Range(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Missing curve, currency, or other market object.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Market data that cannot be turned into a valid curve.
    #[error("data error: {0}")]
    Data(String),

    #[error("mixed collateral contexts: {0}")]
    MixedCollateral(String),

    #[error("degenerate instrument: {0}")]
    DegenerateInstrument(String),

    /// Discount ratio with `1 + tau * E <= 0`.
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("missing model parameters: {0}")]
    MissingParams(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse { line: e.line(), message: e.to_string() }
    }
}
