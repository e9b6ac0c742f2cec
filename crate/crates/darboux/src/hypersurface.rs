//! From an immersion's 2-jet to the first/second fundamental forms, the
//! trace-free form h, umbilicity, and the conformal quadratic element
//! I = h^2 / g.
//!
//! With tangents t_i and unit normal nu of a nonisotropic point, the induced
//! metric is g_ij = G(t_i, t_j) and the tangency form is
//! lambda_ij = G(d2x_ij, nu). When the normal is timelike (epsilon = -1) the
//! sign convention flips g to -g so the frame normalization `(A_n, A_n) = 1`
//! can hold; the flag is kept on [`FundamentalData`]. The trace-free part
//! h = lambda - mean(lambda) g then satisfies the apolarity condition
//! g^{ij} h_{ij} = 0, and I(w) = h(w)^2 / g(w) is a Moebius-invariant,
//! degree-2-homogeneous function of tangent directions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bilinear::SymForm;
use crate::error::GeometryError;
use crate::expr::{eval_jet2, parse, ExprAst, ParseError};
use crate::mobius::{AmbientSpace, MobiusMap};

/// Default umbilicity threshold on |h|_F / |g|_F.
pub const DEFAULT_UMBILIC_TOL: f64 = 1e-8;

/// A parametrized hypersurface: n component expressions over d = n - 1
/// parameters, with a box domain.
#[derive(Debug, Clone)]
pub struct Immersion {
    space: AmbientSpace,
    components: Vec<Arc<ExprAst>>,
    domain: Vec<(f64, f64)>,
}

impl Immersion {
    pub fn new(
        space: AmbientSpace,
        components: Vec<Arc<ExprAst>>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self, GeometryError> {
        let n = space.dim();
        if components.len() != n {
            return Err(GeometryError::dim_mismatch(
                components.len(),
                n,
                "immersion component count",
            ));
        }
        if domain.len() != n - 1 {
            return Err(GeometryError::dim_mismatch(
                domain.len(),
                n - 1,
                "immersion domain dimension",
            ));
        }
        for (lo, hi) in &domain {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(GeometryError::InvalidParameter(format!(
                    "empty domain range [{lo}, {hi}]"
                )));
            }
        }
        for c in &components {
            if c.max_var() > n - 1 {
                return Err(GeometryError::dim_mismatch(
                    c.max_var(),
                    n - 1,
                    "immersion component variables",
                ));
            }
        }
        Ok(Immersion {
            space,
            components,
            domain,
        })
    }

    /// Parses component expression strings over u1..u{n-1}.
    pub fn parse(
        space: AmbientSpace,
        component_texts: &[&str],
        domain: Vec<(f64, f64)>,
    ) -> Result<Self, ImmersionParseError> {
        let d = space.dim() - 1;
        let components = component_texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                parse(text, d).map_err(|source| ImmersionParseError::Component { index: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Immersion::new(space, components, domain).map_err(ImmersionParseError::Geometry)
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn components(&self) -> &[Arc<ExprAst>] {
        &self.components
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    /// Parameter count d = n - 1.
    pub fn param_dim(&self) -> usize {
        self.space.dim() - 1
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        u.len() == self.param_dim()
            && self
                .domain
                .iter()
                .zip(u.iter())
                .all(|((lo, hi), v)| *lo <= *v && *v <= *hi)
    }

    /// True when `u` lies in the domain with at least `margin` to every face.
    pub fn contains_with_margin(&self, u: &DVector<f64>, margin: f64) -> bool {
        u.len() == self.param_dim()
            && self
                .domain
                .iter()
                .zip(u.iter())
                .all(|((lo, hi), v)| *lo + margin <= *v && *v <= *hi - margin)
    }

    /// Ambient position at `u` (no domain check; evaluation may still fail
    /// on expression domain errors).
    pub fn value_at(&self, u: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let mut x = DVector::zeros(self.space.dim());
        for (a, comp) in self.components.iter().enumerate() {
            x[a] = eval_jet2(comp, u)?.value;
        }
        Ok(x)
    }

    /// Exact second-order data of the immersion at an interior point.
    pub fn jet_at(&self, u: &DVector<f64>) -> Result<SurfaceJet, GeometryError> {
        if !self.contains(u) {
            return Err(GeometryError::DomainError(format!(
                "parameter point {:?} outside the immersion domain",
                u.as_slice()
            )));
        }
        self.jet_at_unchecked(u)
    }

    /// As [`Immersion::jet_at`] without the domain check; used by finite
    /// differences that step slightly outside.
    pub fn jet_at_unchecked(&self, u: &DVector<f64>) -> Result<SurfaceJet, GeometryError> {
        let n = self.space.dim();
        let d = self.param_dim();
        let mut x = DVector::zeros(n);
        let mut tangents = vec![DVector::zeros(n); d];
        let mut second = vec![vec![DVector::zeros(n); d]; d];
        for (a, comp) in self.components.iter().enumerate() {
            let jet = eval_jet2(comp, u)?;
            x[a] = jet.value;
            for (i, tangent) in tangents.iter_mut().enumerate() {
                tangent[a] = jet.grad[i];
            }
            for (i, row) in second.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    entry[a] = jet.hess[(i, j)];
                }
            }
        }
        Ok(SurfaceJet {
            x,
            tangents,
            second,
        })
    }

    /// The immersion composed with a Moebius transformation, built at the
    /// expression level: each new component is
    /// `(M lift(x))_spatial_a / (M lift(x))_minus`, which stays inside the
    /// grammar, so the result can be re-parsed from its printed form.
    pub fn transformed(&self, map: &MobiusMap) -> Result<Immersion, GeometryError> {
        let n = self.space.dim();
        let m = n + 2;
        // Coordinates of lift(x(u)) as expression trees.
        let mut lift: Vec<Arc<ExprAst>> = Vec::with_capacity(m);
        lift.push(ExprAst::literal(1.0));
        for comp in &self.components {
            lift.push(comp.clone());
        }
        let mut plus: Option<Arc<ExprAst>> = None;
        for (a, comp) in self.components.iter().enumerate() {
            let sq = ExprAst::pow(comp.clone(), 2);
            let signed = if self.space.metric_sign(a) > 0.0 {
                sq
            } else {
                ExprAst::neg(sq)
            };
            plus = Some(match plus {
                None => signed,
                Some(acc) => ExprAst::add(acc, signed),
            });
        }
        lift.push(ExprAst::div(plus.expect("n >= 3"), ExprAst::literal(2.0)));

        let row_expr = |row: usize| -> Arc<ExprAst> {
            let mut acc: Option<Arc<ExprAst>> = None;
            for (col, basis) in lift.iter().enumerate() {
                let coeff = map.matrix()[(row, col)];
                if coeff == 0.0 {
                    continue;
                }
                let term = if coeff == 1.0 {
                    basis.clone()
                } else if matches!(**basis, ExprAst::Literal(v) if v == 1.0) {
                    ExprAst::literal(coeff)
                } else {
                    ExprAst::mul(ExprAst::literal(coeff), basis.clone())
                };
                acc = Some(match acc {
                    None => term,
                    Some(prev) => ExprAst::add(prev, term),
                });
            }
            acc.unwrap_or_else(|| ExprAst::literal(0.0))
        };

        let denom = row_expr(0);
        let components = (0..n)
            .map(|a| ExprAst::div(row_expr(1 + a), denom.clone()))
            .collect();
        Immersion::new(self.space, components, self.domain.clone())
    }
}

/// Immersion construction failures, separating expression syntax problems
/// from geometric ones.
#[derive(Debug, thiserror::Error)]
pub enum ImmersionParseError {
    #[error("component {index}: {source}")]
    Component { index: usize, source: ParseError },
    #[error(transparent)]
    Geometry(GeometryError),
}

/// Position, first partials, and second partials of an immersion at a point.
#[derive(Debug, Clone)]
pub struct SurfaceJet {
    pub x: DVector<f64>,
    /// d tangent vectors t_i of ambient dimension n.
    pub tangents: Vec<DVector<f64>>,
    /// d x d symmetric array of second partials.
    pub second: Vec<Vec<DVector<f64>>>,
}

impl SurfaceJet {
    pub fn param_dim(&self) -> usize {
        self.tangents.len()
    }

    /// Second derivative of the position along direction w:
    /// `sum_{ij} second[i][j] w^i w^j`.
    pub fn second_along(&self, w: &DVector<f64>) -> DVector<f64> {
        let d = self.param_dim();
        let mut acc = DVector::zeros(self.x.len());
        for i in 0..d {
            for j in 0..d {
                acc += &self.second[i][j] * (w[i] * w[j]);
            }
        }
        acc
    }
}

/// First and second fundamental data at one nonisotropic surface point.
///
/// `g` is the induced metric, sign-flipped when `epsilon = -1`; `lambda` is
/// the tangency form of the tangent hypersphere; `h` its trace-free part.
#[derive(Debug, Clone)]
pub struct FundamentalData {
    pub g: SymForm,
    pub g_inv: SymForm,
    /// Unit normal with |G(nu, nu)| = 1.
    pub normal: DVector<f64>,
    /// Sign of G(nu, nu).
    pub epsilon: f64,
    pub lambda: SymForm,
    /// Mean curvature analog: contract(g_inv, lambda) / (n - 1).
    pub lambda_mean: f64,
    pub h: SymForm,
}

/// Computes the fundamental data from an exact surface jet.
///
/// `det_eps` overrides the scale-aware degeneracy threshold on det(g).
pub fn fundamental_forms(
    space: &AmbientSpace,
    jet: &SurfaceJet,
    det_eps: Option<f64>,
) -> Result<FundamentalData, GeometryError> {
    let d = jet.param_dim();
    let n = space.dim();
    if d + 1 != n {
        return Err(GeometryError::dim_mismatch(d + 1, n, "fundamental_forms"));
    }

    let g_flat = SymForm::from_fn(d, |i, j| space.dot(&jet.tangents[i], &jet.tangents[j]));
    let threshold = det_eps.unwrap_or_else(|| g_flat.default_det_threshold());
    let det = g_flat.determinant();
    if det.abs() <= threshold {
        return Err(GeometryError::IsotropicPoint {
            at: Vec::new(),
            det,
            threshold,
        });
    }

    let normal = unit_normal(space, &jet.tangents)?;
    let epsilon = space.dot(&normal, &normal).signum();

    // Paper-normalized metric: flip g when the normal is timelike, so the
    // tangent-sphere normalization (A_n, A_n) = 1 holds downstream.
    let g = if epsilon < 0.0 {
        g_flat.scale(-1.0)
    } else {
        g_flat
    };
    let g_inv = g.invert(Some(threshold))?;

    let lambda = SymForm::from_fn(d, |i, j| space.dot(&jet.second[i][j], &normal));
    let lambda_mean = g_inv.contract(&lambda)? / d as f64;
    let h = lambda.sub(&g.scale(lambda_mean))?;

    Ok(FundamentalData {
        g,
        g_inv,
        normal,
        epsilon,
        lambda,
        lambda_mean,
        h,
    })
}

/// G-unit normal of the tangent span, oriented deterministically: positive
/// component along the ambient axis least represented in the tangent span
/// (largest Euclidean residual after projection), so the choice is
/// continuous on patches where that axis does not change.
fn unit_normal(
    space: &AmbientSpace,
    tangents: &[DVector<f64>],
) -> Result<DVector<f64>, GeometryError> {
    let n = space.dim();
    let d = tangents.len();

    // Kernel of the d x n matrix (t_i^T G): the G-orthogonal complement.
    let mut tg = DMatrix::zeros(d, n);
    for (i, t) in tangents.iter().enumerate() {
        for a in 0..n {
            tg[(i, a)] = space.metric_sign(a) * t[a];
        }
    }
    let mut nu = kernel_direction(&tg)?;

    let norm_sq = space.dot(&nu, &nu);
    if norm_sq.abs() <= 1e-12 {
        return Err(GeometryError::NullNormal { norm_sq });
    }
    nu /= norm_sq.abs().sqrt();

    // Orientation: Euclidean-project each ambient axis onto the tangent
    // span; the axis with the largest residual is the least represented.
    let mut basis = DMatrix::zeros(n, d);
    for (i, t) in tangents.iter().enumerate() {
        basis.set_column(i, t);
    }
    let qr = basis.qr();
    let q = qr.q();
    let mut best_axis = 0;
    let mut best_residual = -1.0;
    for a in 0..n {
        let mut residual = 1.0; // |e_a|^2 = 1
        for c in 0..q.ncols() {
            let proj = q[(a, c)];
            residual -= proj * proj;
        }
        if residual > best_residual {
            best_residual = residual;
            best_axis = a;
        }
    }
    let mut component = nu[best_axis];
    if component == 0.0 {
        // Fall back to the largest-magnitude component.
        let mut best = 0;
        for a in 0..n {
            if nu[a].abs() > nu[best].abs() {
                best = a;
            }
        }
        component = nu[best];
    }
    if component < 0.0 {
        nu = -nu;
    }
    Ok(nu)
}

/// One-dimensional kernel of a d x n matrix (d = n - 1) via SVD of the
/// stacked matrix: the right-singular vector of the smallest singular value.
fn kernel_direction(m: &DMatrix<f64>) -> Result<DVector<f64>, GeometryError> {
    let n = m.ncols();
    // Augment with a zero row to make the SVD square so V^T is n x n.
    let mut square = DMatrix::zeros(n, n);
    square.rows_mut(0, m.nrows()).copy_from(m);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut min_idx = 0;
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s < svd.singular_values[min_idx] {
            min_idx = k;
        }
    }
    Ok(v_t.row(min_idx).transpose())
}

/// The conformal quadratic element I(w) = h(w)^2 / g(w) at a tangent
/// direction w in the parameter co-frame.
pub fn invariant_i(data: &FundamentalData, w: &DVector<f64>) -> Result<f64, GeometryError> {
    let gw = data.g.evaluate(w)?;
    let scale = data.g.frobenius_norm() * w.norm_squared();
    if gw.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(GeometryError::IsotropicDirection { value: gw });
    }
    let hw = data.h.evaluate(w)?;
    Ok(hw * hw / gw)
}

/// The scale-gauge-fixed pair (g_hat, h_hat) with |det g_hat| = 1; invariant
/// under the renormalization (g, h) -> (r^2 g, r h) for any r != 0.
#[derive(Debug, Clone)]
pub struct InvariantElement {
    pub g_hat: SymForm,
    pub h_hat: SymForm,
    /// Sign applied to h to make its first nonzero entry (row-major)
    /// non-negative.
    pub gauge_sign: f64,
}

/// Gauge-fixes the weight of (g, h) per their relative-invariance laws
/// (g of weight 2, h of weight 1).
pub fn canonical_element(data: &FundamentalData) -> Result<InvariantElement, GeometryError> {
    let d = data.g.dim();
    let det = data.g.determinant();
    if det.abs() <= f64::MIN_POSITIVE {
        return Err(GeometryError::DegenerateForm {
            det,
            threshold: f64::MIN_POSITIVE,
        });
    }
    let g_scale = det.abs().powf(1.0 / d as f64);
    let h_scale = det.abs().powf(0.5 / d as f64);
    let g_hat = data.g.scale(1.0 / g_scale);
    let mut h_hat = data.h.scale(1.0 / h_scale);

    // Sign gauge: first row-major entry of h_hat that is nonzero relative
    // to the largest entry must be non-negative.
    let mut gauge_sign = 1.0;
    let max_abs = h_hat.max_abs();
    if max_abs > 0.0 {
        'outer: for i in 0..d {
            for j in 0..d {
                let v = h_hat.entry(i, j);
                if v.abs() > 1e-12 * max_abs {
                    if v < 0.0 {
                        gauge_sign = -1.0;
                        h_hat = h_hat.scale(-1.0);
                    }
                    break 'outer;
                }
            }
        }
    }
    Ok(InvariantElement {
        g_hat,
        h_hat,
        gauge_sign,
    })
}

/// Umbilicity test: |h|_F / |g|_F below `tol`.
pub fn is_umbilical(data: &FundamentalData, tol: f64) -> bool {
    assert!(tol > 0.0, "umbilic tolerance must be positive");
    data.h.frobenius_norm() < tol * data.g.frobenius_norm()
}
