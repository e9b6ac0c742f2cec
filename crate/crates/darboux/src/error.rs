//! Error types shared by the geometry modules.

use thiserror::Error;

/// Errors raised by bilinear-form, light-cone, surface, frame, and
/// equivalence computations.
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    /// A symmetric form is numerically singular.
    #[error("degenerate form: |det| = {det:.3e} <= threshold {threshold:.3e}")]
    DegenerateForm { det: f64, threshold: f64 },

    /// Two operands have incompatible dimensions.
    #[error("dimension mismatch: {left} vs {right} in {context}")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    /// A projective point has no finite image in the flat chart.
    #[error("point at infinity: minus-coordinate {minus:.3e} is negligible")]
    PointAtInfinity { minus: f64 },

    /// A transformation generator was given an illegal parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Expression evaluation left the real domain (sqrt of a non-positive
    /// argument, division by zero).
    #[error("domain error: {0}")]
    DomainError(String),

    /// The induced metric g is degenerate: the tangent space touches the
    /// isotropic cone.
    #[error("isotropic point at u = {at:?}: |det g| = {det:.3e} <= {threshold:.3e}")]
    IsotropicPoint {
        at: Vec<f64>,
        det: f64,
        threshold: f64,
    },

    /// The normal direction is null, so it cannot be unit-normalized.
    #[error("null normal: |G(nu, nu)| = {norm_sq:.3e}")]
    NullNormal { norm_sq: f64 },

    /// A tangent direction is isotropic for g, so h^2/g is undefined there.
    #[error("isotropic direction: g(w) = {value:.3e}")]
    IsotropicDirection { value: f64 },

    /// The frame matrix could not be inverted.
    #[error("singular frame matrix at u = {at:?}")]
    SingularFrame { at: Vec<f64> },

    /// The factorization g_bar = sigma^2 g, h_bar = sigma h fails.
    #[error(
        "forms not proportional: g residual {g_residual:.3e}, h residual {h_residual:.3e} (tol {tol:.1e})"
    )]
    NotProportional {
        g_residual: f64,
        h_residual: f64,
        tol: f64,
    },

    /// A point assumed non-umbilical is umbilical.
    #[error("umbilical point: |h|/|g| = {ratio:.3e} < {tol:.1e}")]
    UmbilicalPoint { ratio: f64, tol: f64 },

    /// The correspondence system is rank-deficient.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
}

impl GeometryError {
    pub(crate) fn dim_mismatch(left: usize, right: usize, context: &'static str) -> Self {
        GeometryError::DimensionMismatch {
            left,
            right,
            context,
        }
    }
}
