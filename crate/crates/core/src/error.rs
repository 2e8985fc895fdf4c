use thiserror::Error;

/// Errors raised by the oscillator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    /// The half-plane vector field is undefined on the threshold itself.
    #[error("state lies on the switching threshold (y = 0) at x = {x}")]
    OnThreshold { x: f64 },

    #[error("departure into the {side} half-plane is not admissible at x = {x}")]
    InadmissibleDeparture { side: &'static str, x: f64 },

    /// Scan exceeded its horizon without a sign change.
    #[error("no root found within horizon {horizon} (start x = {x})")]
    NoRoot { x: f64, horizon: f64 },

    #[error("no periodic orbit: {0}")]
    NoOrbit(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("tolerance not met: {0}")]
    Tolerance(String),

    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },

    /// Operation was requested outside the parameter regime it was built for.
    #[error("regime violation: {0}")]
    Regime(String),

    #[error("trajectory not captured: {0}")]
    NotCaptured(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
