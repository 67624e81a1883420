use thiserror::Error;

/// Errors surfaced by the library layers and the CLI.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("operators/states built on different spaces: dim {left} vs dim {right}")]
    SpaceMismatch { left: usize, right: usize },

    #[error(
        "steady state is not unique (null-space dimension > 1); \
         smallest singular values {sigma_min:.3e}, {sigma_next:.3e}"
    )]
    DegenerateSteadyState { sigma_min: f64, sigma_next: f64 },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("Fock cutoff ladder exceeded hard cap n_max = {cap}; last change {last_change:.3e} > tol {tol:.3e}")]
    CutoffExceeded { cap: usize, last_change: f64, tol: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("observable undefined: {0}")]
    Undefined(String),

    #[error(
        "correlation window too short: |C(tau)| only decayed to {reached:.3e} of C(0), \
         need < {required:.3e}"
    )]
    DecayCriterionUnmet { reached: f64, required: f64 },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("unknown preset '{name}'; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
