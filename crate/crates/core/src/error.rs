use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// The model violates one of its standing assumptions.
    #[error("model assumption violated: {0}")]
    Assumption(String),

    /// The thinning envelope was exceeded by the true intensity.
    #[error("thinning envelope violated at t = {time}: intensity {intensity} > bound {bound}")]
    EnvelopeViolation {
        time: f64,
        intensity: f64,
        bound: f64,
    },

    /// An ODE integration produced a non-finite state.
    #[error("integrator failure: {0}")]
    Integrator(String),

    /// An estimator cannot produce a trustworthy value.
    #[error("estimator refused: {0}")]
    Refused(String),

    /// The requested computation is not available for this model.
    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
