use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("function is not differentiable at the requested point: {0}")]
    NotDifferentiable(String),

    #[error("infimal convolution is unbounded below")]
    UnboundedResult,

    #[error("scale must be positive, got {0}")]
    NonpositiveScale(f64),

    #[error("pointwise minimum is not convex")]
    NonConvexMin,

    #[error("function has empty domain")]
    EmptyDomain,

    #[error("function has unbounded domain")]
    UnboundedDomain,

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("degenerate polynomial fit (condition {condition:.3e})")]
    DegenerateFit { condition: f64 },

    #[error("subspaces are not coordinate-aligned complements")]
    NonAlignedSubspaces,

    #[error("level-set curvature is singular at the origin")]
    OriginSingularity,

    #[error("class certification failed: {0}")]
    ClassViolation(String),

    #[error("profile is not continuously differentiable near s = {at}")]
    NonSmoothXi { at: f64 },

    #[error("ill-conditioned Vandermonde system (condition {condition:.3e})")]
    IllConditionedVandermonde { condition: f64 },

    #[error("Hessian is singular; the gradient map is not injective")]
    SingularHessian,

    #[error("function is not radial")]
    NonRadial,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Numeric-certification failures, as opposed to bad input.
    pub fn is_certification(&self) -> bool {
        matches!(
            self,
            Error::ClassViolation(_)
                | Error::DegenerateFit { .. }
                | Error::IllConditionedVandermonde { .. }
                | Error::NonSmoothXi { .. }
        )
    }
}
