use thiserror::Error;

/// Errors raised by norm evaluation, geometry and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcapError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("dual norm is not differentiable at this point")]
    NonSmoothPoint,

    #[error("dual maximization did not converge (achieved tolerance {achieved:e})")]
    DualNonConvergence { achieved: f64 },

    #[error("exponent p = {p} outside (1, {dim})")]
    ExponentOutOfRange { p: f64, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies inside the Wulff shape (H0 = {h0}, radius = {radius})")]
    InsideWulffShape { h0: f64, radius: f64 },

    #[error("anchor point is not interior to the body")]
    AnchorNotInterior,

    #[error("body is not strictly inside the outer Wulff shape of radius {radius}")]
    BodyNotInside { radius: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("level {level} is not bracketed along ray {ray}")]
    LevelNotBracketed { level: f64, ray: usize },

    #[error("field is not positive at a sampled point")]
    NonPositiveField,

    #[error("non-monotone sphere averages: {0}")]
    NonMonotone(String),

    #[error("parse error at `{token}`: {reason}")]
    Parse { token: String, reason: String },
}

pub type Result<T> = std::result::Result<T, FcapError>;
