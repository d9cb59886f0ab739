use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid domain mask: {0}")]
    InvalidDomain(String),

    #[error("operation requires spatially constant coefficients")]
    NonConstantCoefficients,

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("fixed-point map is not contracting (distance ratio {ratio:.3} at iteration {iteration}); use a shorter window")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("fixed-point iteration did not reach tolerance after {iterations} iterations (last distance {distance:e})")]
    FixedPointNotConverged { iterations: usize, distance: f64 },

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("time step {dt} violates the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operation requires the {expected} model")]
    WrongModel { expected: &'static str },

    #[error("structural assumption `{check}` violated at sample {sample}: {detail}")]
    Structure {
        check: &'static str,
        sample: usize,
        detail: String,
    },

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::CgNotConverged { .. }
                | Error::NonContraction { .. }
                | Error::FixedPointNotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
