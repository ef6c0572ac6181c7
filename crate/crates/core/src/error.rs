use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("direction undefined: norm {norm:e} is at or below {eps:e}")]
    DegenerateDirection { norm: f64, eps: f64 },

    #[error("vector is not unit-norm (|y| = {norm})")]
    NotUnit { norm: f64 },

    #[error("matrix is ill-conditioned (condition estimate {cond:e}, determinant {det:e})")]
    IllConditioned { cond: f64, det: f64 },

    #[error("vector field returned a non-finite value at t = {t}")]
    NonFiniteField { t: f64 },

    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("gain {name} must be positive and finite, got {value}")]
    InvalidGain { name: &'static str, value: f64 },

    #[error("window of {delta} s is unusable for a signal with step {h} s spanning {span} s")]
    WindowTooShort { delta: f64, h: f64, span: f64 },

    #[error("samples are not uniformly spaced at index {index}")]
    NonUniformSampling { index: usize },

    #[error("excitation level invalid: need 0 < mu < delta, got mu = {mu}, delta = {delta}")]
    InvalidPe { mu: f64, delta: f64 },

    #[error("error norm {value:e} at t = {t} is not positive, cannot take its logarithm")]
    NonPositiveError { t: f64, value: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
