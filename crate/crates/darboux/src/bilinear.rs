//! Signed symmetric bilinear forms: inversion, contraction, signature
//! classification, and real decomposability of quadratic forms.
//!
//! Forms are stored as small dense symmetric matrices (dimensions here
//! never exceed ~16), with an eigenvalue-based rank test using a relative
//! threshold so that classification is stable under rescaling.

use nalgebra::{DMatrix, DVector};

use crate::error::GeometryError;

/// Default relative eigenvalue threshold for rank decisions.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Base factor for the scale-aware degeneracy test of [`SymForm::invert`]:
/// a form is degenerate when `|det| <= DEFAULT_DET_EPS * (max row norm)^dim`.
pub const DEFAULT_DET_EPS: f64 = 1e-12;

/// Metric signature (p, q): p directions squaring to +1, q to -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
}

impl Signature {
    /// A signature with `p >= 1` plus directions and `q` minus directions.
    pub fn new(p: usize, q: usize) -> Result<Self, GeometryError> {
        if p < 1 {
            return Err(GeometryError::InvalidParameter(
                "signature requires p >= 1".into(),
            ));
        }
        Ok(Signature { p, q })
    }

    /// Ambient dimension n = p + q.
    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Sign of the a-th basis direction (0-based): +1 for a < p, -1 after.
    pub fn sign(&self, a: usize) -> f64 {
        if a < self.p {
            1.0
        } else {
            -1.0
        }
    }
}

/// A real symmetric bilinear form of some dimension d, stored dense.
///
/// The entry matrix is kept exactly symmetric: constructors symmetrize.
#[derive(Debug, Clone, PartialEq)]
pub struct SymForm {
    mat: DMatrix<f64>,
}

impl SymForm {
    /// Wraps a matrix, symmetrizing it as `(A + A^T) / 2`.
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self, GeometryError> {
        if mat.nrows() != mat.ncols() {
            return Err(GeometryError::dim_mismatch(
                mat.nrows(),
                mat.ncols(),
                "SymForm::from_matrix",
            ));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        Ok(SymForm { mat: sym })
    }

    /// Builds a form entrywise; the function is called with i <= j and the
    /// value mirrored, so the result is symmetric by construction.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut mat = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        SymForm { mat }
    }

    pub fn identity(dim: usize) -> Self {
        SymForm {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SymForm {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymForm {
            mat: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn determinant(&self) -> f64 {
        self.mat.clone().lu().determinant()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Entrywise scaling; keeps symmetry exactly.
    pub fn scale(&self, c: f64) -> SymForm {
        SymForm { mat: &self.mat * c }
    }

    /// Entrywise difference with another form.
    pub fn sub(&self, other: &SymForm) -> Result<SymForm, GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::dim_mismatch(
                self.dim(),
                other.dim(),
                "SymForm::sub",
            ));
        }
        Ok(SymForm {
            mat: &self.mat - &other.mat,
        })
    }

    /// Scale-aware degeneracy threshold: `DEFAULT_DET_EPS * (max row norm)^d`.
    pub fn default_det_threshold(&self) -> f64 {
        let d = self.dim();
        let max_row = (0..d)
            .map(|i| self.mat.row(i).norm())
            .fold(0.0_f64, f64::max);
        DEFAULT_DET_EPS * max_row.powi(d as i32).max(f64::MIN_POSITIVE)
    }

    /// Inverse form g^{ij}.
    ///
    /// Fails with [`GeometryError::DegenerateForm`] when `|det| <= det_eps`
    /// (`None` selects the scale-aware default threshold); downstream this
    /// signals an isotropic hypersurface point.
    pub fn invert(&self, det_eps: Option<f64>) -> Result<SymForm, GeometryError> {
        let threshold = det_eps.unwrap_or_else(|| self.default_det_threshold());
        let det = self.determinant();
        if det.abs() <= threshold {
            return Err(GeometryError::DegenerateForm { det, threshold });
        }
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or(GeometryError::DegenerateForm { det, threshold })?;
        // The inverse of a symmetric matrix is symmetric; re-symmetrize to
        // keep the stored-symmetric invariant bit-exact.
        SymForm::from_matrix(inv)
    }

    /// Full contraction `sum_ij self[i][j] * other[i][j]`; with `self` an
    /// inverse metric this is the trace g^{ij} h_{ij}.
    pub fn contract(&self, other: &SymForm) -> Result<f64, GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::dim_mismatch(
                self.dim(),
                other.dim(),
                "SymForm::contract",
            ));
        }
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.mat[(i, j)] * other.mat[(i, j)];
            }
        }
        Ok(acc)
    }

    /// Evaluates the quadratic form on a direction vector: g_{ij} v^i v^j.
    pub fn evaluate(&self, v: &DVector<f64>) -> Result<f64, GeometryError> {
        if self.dim() != v.len() {
            return Err(GeometryError::dim_mismatch(
                self.dim(),
                v.len(),
                "SymForm::evaluate",
            ));
        }
        Ok((v.transpose() * &self.mat * v)[(0, 0)])
    }

    /// Rank / signature / decomposability classification, with rank counted
    /// as eigenvalues satisfying `|mu| > tol * max|mu|`.
    pub fn classify(&self, tol: f64) -> FormClass {
        assert!(tol > 0.0, "classification tolerance must be positive");
        let (eigenvalues, _) = jacobi_eigen(&self.mat);
        let max_abs = eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let mut plus = 0;
        let mut minus = 0;
        if max_abs > 0.0 {
            for &mu in eigenvalues.iter() {
                if mu.abs() > tol * max_abs {
                    if mu > 0.0 {
                        plus += 1;
                    } else {
                        minus += 1;
                    }
                }
            }
        }
        let rank = plus + minus;
        FormClass {
            rank,
            plus,
            minus,
            decomposable: rank <= 1 || (rank == 2 && plus == 1 && minus == 1),
        }
    }

    /// True iff the quadratic form is a product of two real linear forms:
    /// rank <= 1, or rank 2 with signature (1, 1).
    pub fn is_decomposable(&self, tol: f64) -> bool {
        self.classify(tol).decomposable
    }

    /// For a decomposable form, returns linear forms (alpha, beta) with
    /// `q = alpha * beta` (symmetrized outer product). `None` if the form is
    /// not decomposable at the given tolerance.
    pub fn decompose(&self, tol: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let class = self.classify(tol);
        if !class.decomposable {
            return None;
        }
        let (eigenvalues, eigenvectors) = jacobi_eigen(&self.mat);
        let d = self.dim();
        if class.rank == 0 {
            return Some((DVector::zeros(d), DVector::zeros(d)));
        }
        // Indices of the dominant eigenvalues, largest magnitude first.
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eigenvalues[b]
                .abs()
                .partial_cmp(&eigenvalues[a].abs())
                .unwrap()
        });
        if class.rank == 1 {
            let mu = eigenvalues[order[0]];
            let v = eigenvectors.column(order[0]).into_owned();
            let s = mu.abs().sqrt();
            let alpha = &v * s;
            let beta = if mu >= 0.0 { alpha.clone() } else { -&alpha };
            return Some((alpha, beta));
        }
        // rank 2, signature (1, 1): mu1 > 0 > mu2 and
        // q = (sqrt(mu1) v1 + sqrt(-mu2) v2)(sqrt(mu1) v1 - sqrt(-mu2) v2).
        let (i1, i2) = (order[0], order[1]);
        let (ip, im) = if eigenvalues[i1] > 0.0 {
            (i1, i2)
        } else {
            (i2, i1)
        };
        let sp = eigenvalues[ip].max(0.0).sqrt();
        let sm = (-eigenvalues[im]).max(0.0).sqrt();
        let vp = eigenvectors.column(ip).into_owned();
        let vm = eigenvectors.column(im).into_owned();
        Some((&vp * sp + &vm * sm, &vp * sp - &vm * sm))
    }
}

/// Cyclic Jacobi eigendecomposition for small dense symmetric matrices.
/// Returns (eigenvalues, eigenvectors-as-columns). Converges to near machine
/// precision, which the rank-based classification and the factorization
/// check both rely on; the dimensions here are tiny, so cost is irrelevant.
fn jacobi_eigen(mat: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = mat.nrows();
    let mut a = mat.clone();
    let mut v = DMatrix::identity(d, d);
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * a.norm().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Rank and inertia of a quadratic form, plus real decomposability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormClass {
    pub rank: usize,
    pub plus: usize,
    pub minus: usize,
    pub decomposable: bool,
}
