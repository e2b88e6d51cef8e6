use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: n = {n}, need n >= 8 for the 7-point interior stencils")]
    GridTooCoarse { n: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("damping parameter alpha = {alpha} outside (-1, 1)")]
    InvalidAlpha { alpha: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },

    #[error("unsupported Sobolev order k = {k}, expected 0, 1 or 2")]
    UnsupportedSobolevOrder { k: usize },

    #[error("linear solve failed: {what}")]
    SolveFailed { what: String },

    #[error("dense eigensolve did not converge")]
    EigensolveFailed,

    #[error("problem size n = {n} exceeds the dense-oracle limit {limit}")]
    TooLargeForDense { n: usize, limit: usize },

    #[error("field violates the discrete boundary conditions: residual {residual:.3e} > tol {tol:.3e}")]
    NotInDomain { residual: f64, tol: f64 },

    #[error("insufficient data: {what}")]
    InsufficientData { what: String },

    #[error("fixed-point iteration is not contracting (last factors {factors:?})")]
    NonContraction { factors: Vec<f64> },

    #[error("norm blow-up at t = {t}: {norm:.3e} exceeds guard {limit:.3e}")]
    BlowUp { t: f64, norm: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
