use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The propagator could not be inverted, e.g. Λ_s is singular at that s.
    #[error("singular propagator (condition number {condition:e})")]
    SingularPropagator { condition: f64 },

    #[error("step size underflow at t = {t}")]
    Stiffness { t: f64 },

    #[error("quadrature tolerance not met: estimate {estimate}, error estimate {error:e}")]
    ToleranceNotMet { estimate: f64, error: f64 },

    #[error("rate undefined at t = {t}: coherence {value} is not positive")]
    RateUndefined { t: f64, value: f64 },

    #[error("logarithmic singularity at t = {t}: eigenvalue {index} is {value}")]
    LogSingularity { t: f64, index: usize, value: f64 },

    #[error("memory kernel pole at z = {z}: eigenvalue {index} vanishes")]
    KernelPole { z: f64, index: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("numerical stability violated: {0}")]
    Stability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
