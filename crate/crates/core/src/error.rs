use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("query outside table domain on axis `{axis}`: {value} not in [{lower}, {upper}]")]
    OutOfDomain {
        axis: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("trim did not converge after {iterations} iterations (residual {residual:.3e})")]
    TrimFailure { iterations: usize, residual: f64 },

    #[error("trim converged onto a physical bound: {variable} = {value}")]
    SaturatedTrim { variable: &'static str, value: f64 },

    #[error("riccati solver failed: {0}")]
    Riccati(String),

    #[error("riccati differential equation diverged (|P| = {norm:.3e}); horizon too long")]
    HorizonTooLong { norm: f64 },

    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },

    #[error("objective evaluation failed at design (c = {c}, w = {w}): {source}")]
    Evaluation {
        c: f64,
        w: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::TrimFailure { .. }
            | Error::SaturatedTrim { .. }
            | Error::Riccati(_)
            | Error::HorizonTooLong { .. }
            | Error::Diverged { .. } => true,
            Error::Evaluation { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
