use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array or matrix dimensions do not match.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// A window or query point does not sit on a grid node.
    #[error("alignment error: {0} is not a grid node")]
    Alignment(f64),

    /// Interval endpoints are in the wrong order.
    #[error("order error: start {start} exceeds end {end}")]
    Order { start: usize, end: usize },

    /// A controlled path was used with a rough path other than its reference.
    #[error("contract error: {0}")]
    Contract(String),

    /// The grid cannot represent the requested modes.
    #[error("resolution error: grid of {points} points cannot resolve {modes} modes")]
    Resolution { points: usize, modes: usize },

    /// Not enough data for a statistical estimate.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// The solution left the configured ball.
    #[error("blow-up at t = {time}: norm {norm} exceeds radius {radius}")]
    BlowUp { time: f64, norm: f64, radius: f64 },

    /// An iteration did not reach its tolerance.
    #[error("no convergence after {iterations} iterations (last increment {increment})")]
    NonConvergence { iterations: usize, increment: f64 },

    /// Invalid experiment or solver configuration.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
