//! The Darboux light-cone model: lifts, hyperspheres, the ambient quadric,
//! and the pseudo-orthogonal (Moebius) group acting on it.
//!
//! The flat space R^{p,q} embeds into the null cone of R^{p+1,q+1} through
//! the basis (e_minus, e_1..e_n, e_plus) with pairing
//! `<X, Y> = G(x_sp, y_sp) - x_minus y_plus - x_plus y_minus`, so that
//! `lift(x) = e_minus + x + (G(x,x)/2) e_plus` is null and
//! `<lift(x), e_plus> = -1`. Points are null vectors up to scale;
//! hyperspheres are non-null vectors up to scale, with incidence given by
//! a vanishing pairing.

use nalgebra::{DMatrix, DVector};

use crate::bilinear::{Signature, SymForm};
use crate::error::GeometryError;

/// Relative threshold below which a projective minus-coordinate counts as
/// the point at infinity.
const INFINITY_EPS: f64 = 1e-12;

/// The flat model R^{p,q} of a conformal or pseudoconformal space, together
/// with its light-cone embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbientSpace {
    signature: Signature,
}

impl AmbientSpace {
    /// Geometry operations need n = p + q >= 3; rigidity certification
    /// additionally demands n >= 4, which is checked where it applies.
    pub fn new(p: usize, q: usize) -> Result<Self, GeometryError> {
        let signature = Signature::new(p, q)?;
        if signature.dim() < 3 {
            return Err(GeometryError::InvalidParameter(format!(
                "ambient dimension p + q = {} must be at least 3",
                signature.dim()
            )));
        }
        Ok(AmbientSpace { signature })
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Flat dimension n.
    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    /// Homogeneous dimension n + 2 of the light-cone model.
    pub fn homogeneous_dim(&self) -> usize {
        self.dim() + 2
    }

    /// Sign of the a-th flat basis direction.
    pub fn metric_sign(&self, a: usize) -> f64 {
        self.signature.sign(a)
    }

    /// Flat scalar product G(x, y) = sum_a eta_a x_a y_a.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let mut acc = 0.0;
        for a in 0..self.dim() {
            acc += self.metric_sign(a) * x[a] * y[a];
        }
        acc
    }

    /// Ambient pairing of light-cone vectors.
    pub fn pair(&self, x: &LightConeVector, y: &LightConeVector) -> f64 {
        self.dot(&x.spatial, &y.spatial) - x.minus * y.plus - x.plus * y.minus
    }

    /// Gram matrix of the ambient pairing in the (minus, spatial, plus)
    /// coordinate order.
    pub fn ambient_gram(&self) -> DMatrix<f64> {
        let m = self.homogeneous_dim();
        let mut q = DMatrix::zeros(m, m);
        for a in 0..self.dim() {
            q[(1 + a, 1 + a)] = self.metric_sign(a);
        }
        q[(0, m - 1)] = -1.0;
        q[(m - 1, 0)] = -1.0;
        q
    }

    /// Darboux lift of a flat point: minus = 1, spatial = x,
    /// plus = G(x, x)/2, which is null by construction.
    pub fn lift_point(&self, x: &DVector<f64>) -> LightConeVector {
        LightConeVector {
            minus: 1.0,
            spatial: x.clone(),
            plus: 0.5 * self.dot(x, x),
        }
    }

    /// Inverse of the lift: spatial / minus. Scale-invariant; fails with
    /// [`GeometryError::PointAtInfinity`] when the minus-coordinate is
    /// negligible against the vector's Euclidean norm.
    pub fn project_point(&self, x: &LightConeVector) -> Result<DVector<f64>, GeometryError> {
        if x.minus.abs() <= INFINITY_EPS * x.euclidean_norm() {
            return Err(GeometryError::PointAtInfinity { minus: x.minus });
        }
        Ok(&x.spatial / x.minus)
    }

    /// Vector of the hypersphere G(x - center, x - center) = radius_sq,
    /// namely `lift(center) - (radius_sq / 2) e_plus`: a point lies on the
    /// sphere exactly when its lift pairs to zero with this vector, and
    /// `<S, S> = radius_sq`.
    pub fn sphere_vector(&self, center: &DVector<f64>, radius_sq: f64) -> LightConeVector {
        let mut s = self.lift_point(center);
        s.plus -= 0.5 * radius_sq;
        s
    }

    /// Vector of the hyperplane G(normal, x) = offset, the sphere through
    /// infinity: S = normal + offset * e_plus with `<S, S> = G(normal, normal)`.
    pub fn hyperplane_vector(&self, normal: &DVector<f64>, offset: f64) -> LightConeVector {
        LightConeVector {
            minus: 0.0,
            spatial: normal.clone(),
            plus: offset,
        }
    }

    /// The second null frame point e_plus (the point at infinity).
    pub fn e_plus(&self) -> LightConeVector {
        LightConeVector {
            minus: 0.0,
            spatial: DVector::zeros(self.dim()),
            plus: 1.0,
        }
    }

    /// The origin's lift e_minus.
    pub fn e_minus(&self) -> LightConeVector {
        LightConeVector {
            minus: 1.0,
            spatial: DVector::zeros(self.dim()),
            plus: 0.0,
        }
    }
}

/// Pairing of a point vector with a sphere vector (or two sphere vectors):
/// zero means incidence (the point lies on the sphere) or orthogonality of
/// the two spheres.
pub fn incidence(space: &AmbientSpace, x: &LightConeVector, s: &LightConeVector) -> f64 {
    space.pair(x, s)
}

/// Residual of the Darboux hyperquadric equation for homogeneous frame
/// coordinates `(x^0, x^1..x^{n-1}, x^n, x^{n+1})` expressed in a frame
/// whose Gram matrix is the canonical one with tangent block `g_frame`:
/// `g_ij x^i x^j + (x^n)^2 - 2 x^0 x^{n+1}`.
pub fn quadric_residual(coords: &DVector<f64>, g_frame: &SymForm) -> Result<f64, GeometryError> {
    let d = g_frame.dim();
    if coords.len() != d + 3 {
        return Err(GeometryError::dim_mismatch(
            coords.len(),
            d + 3,
            "quadric_residual",
        ));
    }
    let tangent = coords.rows(1, d).into_owned();
    let x0 = coords[0];
    let xn = coords[d + 1];
    let xn1 = coords[d + 2];
    Ok(g_frame.evaluate(&tangent)? + xn * xn - 2.0 * x0 * xn1)
}

/// Element of R^{p+1,q+1}: a point of the conformal space when null, a
/// hypersphere when not. Both are understood projectively (up to scale).
#[derive(Debug, Clone, PartialEq)]
pub struct LightConeVector {
    pub minus: f64,
    pub spatial: DVector<f64>,
    pub plus: f64,
}

impl LightConeVector {
    pub fn new(minus: f64, spatial: DVector<f64>, plus: f64) -> Self {
        LightConeVector {
            minus,
            spatial,
            plus,
        }
    }

    pub fn zeros(n: usize) -> Self {
        LightConeVector {
            minus: 0.0,
            spatial: DVector::zeros(n),
            plus: 0.0,
        }
    }

    /// Full coordinate vector in the (minus, spatial, plus) order.
    pub fn to_coords(&self) -> DVector<f64> {
        let n = self.spatial.len();
        let mut v = DVector::zeros(n + 2);
        v[0] = self.minus;
        for a in 0..n {
            v[1 + a] = self.spatial[a];
        }
        v[n + 1] = self.plus;
        v
    }

    pub fn from_coords(coords: &DVector<f64>) -> Self {
        let m = coords.len();
        LightConeVector {
            minus: coords[0],
            spatial: coords.rows(1, m - 2).into_owned(),
            plus: coords[m - 1],
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        (self.minus * self.minus + self.spatial.norm_squared() + self.plus * self.plus).sqrt()
    }

    pub fn scale(&self, c: f64) -> LightConeVector {
        LightConeVector {
            minus: c * self.minus,
            spatial: &self.spatial * c,
            plus: c * self.plus,
        }
    }

    pub fn add(&self, other: &LightConeVector) -> LightConeVector {
        LightConeVector {
            minus: self.minus + other.minus,
            spatial: &self.spatial + &other.spatial,
            plus: self.plus + other.plus,
        }
    }

    pub fn axpy(&self, c: f64, other: &LightConeVector) -> LightConeVector {
        self.add(&other.scale(c))
    }
}

/// Generator kinds for [`MobiusMap::generator`].
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// x -> x + v.
    Translation(DVector<f64>),
    /// Rotation (or boost, when the two axes carry opposite metric signs)
    /// in the plane of flat axes i and j (0-based), by `angle`.
    Rotation { i: usize, j: usize, angle: f64 },
    /// x -> r x, r != 0.
    Dilation(f64),
    /// x -> radius_sq * x / G(x, x).
    Inversion { radius_sq: f64 },
}

/// A conformal transformation, stored as its (n+2)x(n+2) matrix on the
/// light-cone model; satisfies M^T Q M = Q.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusMap {
    matrix: DMatrix<f64>,
}

impl MobiusMap {
    pub fn identity(space: &AmbientSpace) -> Self {
        MobiusMap {
            matrix: DMatrix::identity(space.homogeneous_dim(), space.homogeneous_dim()),
        }
    }

    /// Wraps an explicit matrix; the caller is responsible for it being
    /// pseudo-orthogonal (checked by [`MobiusMap::orthogonality_residual`]).
    pub fn from_matrix(space: &AmbientSpace, matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        let m = space.homogeneous_dim();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(GeometryError::dim_mismatch(
                matrix.nrows(),
                m,
                "MobiusMap::from_matrix",
            ));
        }
        Ok(MobiusMap { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Builds one of the four classical generators of the conformal group.
    pub fn generator(space: &AmbientSpace, kind: &Generator) -> Result<Self, GeometryError> {
        let n = space.dim();
        let m = n + 2;
        let mut mat = DMatrix::identity(m, m);
        match kind {
            Generator::Translation(v) => {
                if v.len() != n {
                    return Err(GeometryError::dim_mismatch(
                        v.len(),
                        n,
                        "translation vector",
                    ));
                }
                // lift(x + v): spatial gains v * minus; plus gains
                // G(x, v) + G(v, v)/2 * minus.
                for a in 0..n {
                    mat[(1 + a, 0)] = v[a];
                    mat[(m - 1, 1 + a)] = space.metric_sign(a) * v[a];
                }
                mat[(m - 1, 0)] = 0.5 * space.dot(v, v);
            }
            Generator::Rotation { i, j, angle } => {
                if *i >= n || *j >= n || i == j {
                    return Err(GeometryError::InvalidParameter(format!(
                        "rotation plane ({i}, {j}) out of range for dimension {n}"
                    )));
                }
                let (si, sj) = (space.metric_sign(*i), space.metric_sign(*j));
                let (ri, rj) = (1 + i, 1 + j);
                if si == sj {
                    let (c, s) = (angle.cos(), angle.sin());
                    mat[(ri, ri)] = c;
                    mat[(ri, rj)] = -s;
                    mat[(rj, ri)] = s;
                    mat[(rj, rj)] = c;
                } else {
                    // Mixed signs: a pseudo-rotation (boost) preserving G.
                    let (c, s) = (angle.cosh(), angle.sinh());
                    mat[(ri, ri)] = c;
                    mat[(ri, rj)] = s;
                    mat[(rj, ri)] = s;
                    mat[(rj, rj)] = c;
                }
            }
            Generator::Dilation(r) => {
                if *r == 0.0 {
                    return Err(GeometryError::InvalidParameter(
                        "dilation factor must be nonzero".into(),
                    ));
                }
                mat[(0, 0)] = 1.0 / r;
                mat[(m - 1, m - 1)] = *r;
            }
            Generator::Inversion { radius_sq } => {
                if *radius_sq == 0.0 {
                    return Err(GeometryError::InvalidParameter(
                        "inversion radius_sq must be nonzero".into(),
                    ));
                }
                // Swaps e_minus and e_plus up to the radius scale; an exact
                // involution.
                mat[(0, 0)] = 0.0;
                mat[(m - 1, m - 1)] = 0.0;
                mat[(0, m - 1)] = 2.0 / radius_sq;
                mat[(m - 1, 0)] = 0.5 * radius_sq;
            }
        }
        Ok(MobiusMap { matrix: mat })
    }

    /// Composition: `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(a: &MobiusMap, b: &MobiusMap) -> MobiusMap {
        MobiusMap {
            matrix: &a.matrix * &b.matrix,
        }
    }

    pub fn inverse(&self) -> Option<MobiusMap> {
        self.matrix
            .clone()
            .try_inverse()
            .map(|matrix| MobiusMap { matrix })
    }

    /// Action on a light-cone vector.
    pub fn apply(&self, x: &LightConeVector) -> LightConeVector {
        LightConeVector::from_coords(&(&self.matrix * x.to_coords()))
    }

    /// Action on a flat point: project(M lift(x)). Inversions legally send
    /// their center to infinity.
    pub fn apply_to_ambient_point(
        &self,
        space: &AmbientSpace,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, GeometryError> {
        space.project_point(&self.apply(&space.lift_point(x)))
    }

    /// Conformal scale factor of the flat action at x: with
    /// `M lift(x) = s lift(phi(x))`, the pullback metric is G / s^2, so the
    /// factor is `1 / |s|` where s is the image's minus-coordinate.
    pub fn conformal_factor(
        &self,
        space: &AmbientSpace,
        x: &DVector<f64>,
    ) -> Result<f64, GeometryError> {
        let image = self.apply(&space.lift_point(x));
        if image.minus.abs() <= INFINITY_EPS * image.euclidean_norm() {
            return Err(GeometryError::PointAtInfinity { minus: image.minus });
        }
        Ok(1.0 / image.minus.abs())
    }

    /// Relative deviation from pseudo-orthogonality:
    /// `|M^T Q M - Q| / |Q|` in Frobenius norms.
    pub fn orthogonality_residual(&self, space: &AmbientSpace) -> f64 {
        let q = space.ambient_gram();
        let lhs = self.matrix.transpose() * &q * &self.matrix;
        (lhs - &q).norm() / q.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn euclid4() -> AmbientSpace {
        AmbientSpace::new(4, 0).unwrap()
    }

    fn minkowski() -> AmbientSpace {
        AmbientSpace::new(3, 1).unwrap()
    }

    fn vec4(a: f64, b: f64, c: f64, d: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b, c, d])
    }

    #[test]
    fn lift_origin_is_e_minus() {
        let space = euclid4();
        let lifted = space.lift_point(&DVector::zeros(4));
        assert_eq!(lifted, space.e_minus());
    }

    #[test]
    fn lift_is_null() {
        let space = euclid4();
        let x = vec4(1.0, 0.0, 0.0, 0.0);
        let lifted = space.lift_point(&x);
        assert_eq!(lifted.plus, 0.5);
        assert_eq!(space.pair(&lifted, &lifted), 0.0);
    }

    #[test]
    fn lift_of_null_ambient_point() {
        let space = minkowski();
        let x = vec4(1.0, 0.0, 0.0, 1.0);
        let lifted = space.lift_point(&x);
        assert_eq!(lifted.plus, 0.0);
        assert_eq!(space.pair(&lifted, &lifted), 0.0);
    }

    #[test]
    fn project_round_trip_and_homogeneity() {
        let space = euclid4();
        let x = vec4(2.0, 3.0, 0.0, 0.0);
        let lifted = space.lift_point(&x);
        assert_eq!(space.project_point(&lifted).unwrap(), x);
        assert_eq!(space.project_point(&lifted.scale(5.0)).unwrap(), x);
    }

    #[test]
    fn project_point_at_infinity() {
        let space = euclid4();
        assert!(matches!(
            space.project_point(&space.e_plus()),
            Err(GeometryError::PointAtInfinity { .. })
        ));
    }

    #[test]
    fn sphere_incidence_and_self_pairing() {
        let space = euclid4();
        let s = space.sphere_vector(&DVector::zeros(4), 1.0);
        // Point on the unit sphere.
        let on = space.lift_point(&vec4(1.0, 0.0, 0.0, 0.0));
        assert_eq!(incidence(&space, &on, &s), 0.0);
        // Hand-expanded pairing: <S, S> = radius_sq.
        assert_eq!(space.pair(&s, &s), 1.0);
    }

    #[test]
    fn hyperplane_as_sphere_through_infinity() {
        let space = euclid4();
        let normal = vec4(0.0, 1.0, 0.0, 0.0);
        let s = space.hyperplane_vector(&normal, 2.0);
        assert_eq!(space.pair(&s, &s), space.dot(&normal, &normal));
        let on = space.lift_point(&vec4(7.0, 2.0, -3.0, 1.0));
        assert_eq!(incidence(&space, &on, &s), 0.0);
        assert_eq!(incidence(&space, &space.e_plus(), &s), 0.0);
    }

    #[test]
    fn incidence_normalization_of_lifts() {
        let space = euclid4();
        let a0 = space.lift_point(&DVector::zeros(4));
        assert_eq!(incidence(&space, &a0, &space.e_plus()), -1.0);
    }

    #[test]
    fn orthogonal_spheres_hand_oracle() {
        // Unit spheres centered at 0 and (1,1,0,0): center distance^2 = 2 =
        // r1^2 + r2^2, so they meet orthogonally at (1,0,0,0).
        let space = euclid4();
        let s1 = space.sphere_vector(&DVector::zeros(4), 1.0);
        let s2 = space.sphere_vector(&vec4(1.0, 1.0, 0.0, 0.0), 1.0);
        let common = space.lift_point(&vec4(1.0, 0.0, 0.0, 0.0));
        assert_relative_eq!(incidence(&space, &common, &s1), 0.0, epsilon = 1e-15);
        assert_relative_eq!(incidence(&space, &common, &s2), 0.0, epsilon = 1e-15);
        assert_relative_eq!(incidence(&space, &s1, &s2), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadric_residual_examples() {
        let g = SymForm::identity(3);
        let n = 4;
        // x^0 = 1: the point A_0 lies on the quadric.
        let mut a0 = DVector::zeros(n + 2);
        a0[0] = 1.0;
        assert_eq!(quadric_residual(&a0, &g).unwrap(), 0.0);
        // x^n = 1: the sphere A_n is off the quadric.
        let mut an = DVector::zeros(n + 2);
        an[n] = 1.0;
        assert_eq!(quadric_residual(&an, &g).unwrap(), 1.0);
        // Direct substitution: 0 + 2 - 2*1*1 = 0.
        let mut x = DVector::zeros(n + 2);
        x[0] = 1.0;
        x[n] = 2.0_f64.sqrt();
        x[n + 1] = 1.0;
        assert_relative_eq!(quadric_residual(&x, &g).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dilation_action() {
        let space = euclid4();
        let m = MobiusMap::generator(&space, &Generator::Dilation(2.0)).unwrap();
        let x = vec4(1.0, 0.0, 0.0, 0.0);
        assert_eq!(
            m.apply_to_ambient_point(&space, &x).unwrap(),
            vec4(2.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn inversion_action_and_center() {
        let space = euclid4();
        let m = MobiusMap::generator(&space, &Generator::Inversion { radius_sq: 1.0 }).unwrap();
        let x = vec4(2.0, 0.0, 0.0, 0.0);
        assert_eq!(
            m.apply_to_ambient_point(&space, &x).unwrap(),
            vec4(0.5, 0.0, 0.0, 0.0)
        );
        assert!(matches!(
            m.apply_to_ambient_point(&space, &DVector::zeros(4)),
            Err(GeometryError::PointAtInfinity { .. })
        ));
    }

    #[test]
    fn translation_inverse_pair() {
        let space = euclid4();
        let v = vec4(0.3, -1.2, 0.5, 2.0);
        let t = MobiusMap::generator(&space, &Generator::Translation(v.clone())).unwrap();
        let t_back = MobiusMap::generator(&space, &Generator::Translation(-v)).unwrap();
        let prod = MobiusMap::compose(&t_back, &t);
        let err = (prod.matrix() - DMatrix::identity(6, 6)).norm();
        assert!(err < 1e-14, "translation round trip deviates by {err}");
    }

    #[test]
    fn translation_action() {
        let space = euclid4();
        let v = vec4(1.0, -2.0, 0.5, 0.0);
        let t = MobiusMap::generator(&space, &Generator::Translation(v.clone())).unwrap();
        let x = vec4(0.2, 0.4, -0.6, 1.0);
        assert_relative_eq!(
            t.apply_to_ambient_point(&space, &x).unwrap(),
            &x + &v,
            epsilon = 1e-14
        );
    }

    #[test]
    fn compose_dilations() {
        let space = euclid4();
        let a = MobiusMap::generator(&space, &Generator::Dilation(2.0)).unwrap();
        let b = MobiusMap::generator(&space, &Generator::Dilation(3.0)).unwrap();
        let m = MobiusMap::compose(&a, &b);
        let x = vec4(0.7, -0.1, 0.4, 0.9);
        assert_relative_eq!(
            m.apply_to_ambient_point(&space, &x).unwrap(),
            &x * 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_action() {
        let space = euclid4();
        let m = MobiusMap::identity(&space);
        let x = vec4(1.0, 2.0, 3.0, 4.0);
        assert_eq!(m.apply_to_ambient_point(&space, &x).unwrap(), x);
    }

    fn random_generator(space: &AmbientSpace, rng: &mut ChaCha8Rng) -> MobiusMap {
        let n = space.dim();
        let kind = match rng.gen_range(0..4) {
            0 => Generator::Translation(DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))),
            1 => {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                Generator::Rotation {
                    i,
                    j,
                    angle: rng.gen_range(-1.0..1.0),
                }
            }
            2 => Generator::Dilation(rng.gen_range(0.3..3.0) * if rng.gen() { 1.0 } else { -1.0 }),
            _ => Generator::Inversion {
                radius_sq: rng.gen_range(0.5..2.0) * if rng.gen() { 1.0 } else { -1.0 },
            },
        };
        MobiusMap::generator(space, &kind).unwrap()
    }

    #[test]
    fn generators_are_pseudo_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for space in [euclid4(), minkowski(), AmbientSpace::new(2, 3).unwrap()] {
            for _ in 0..50 {
                let m = random_generator(&space, &mut rng);
                let r = m.orthogonality_residual(&space);
                assert!(r < 1e-12, "generator residual {r}");
            }
        }
    }

    #[test]
    fn pairings_preserved_by_random_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let space = minkowski();
        for _ in 0..100 {
            let m = MobiusMap::compose(
                &random_generator(&space, &mut rng),
                &random_generator(&space, &mut rng),
            );
            assert!(m.orthogonality_residual(&space) < 1e-10);
            let x =
                LightConeVector::from_coords(&DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)));
            let y =
                LightConeVector::from_coords(&DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)));
            let before = space.pair(&x, &y);
            let after = space.pair(&m.apply(&x), &m.apply(&y));
            assert_relative_eq!(before, after, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn lift_project_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = euclid4();
        for _ in 0..100 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-10.0..10.0));
            let back = space.project_point(&space.lift_point(&x)).unwrap();
            assert!((&back - &x).norm() <= 1e-13 * x.norm().max(1.0));
        }
    }

    #[test]
    fn inversion_is_involutive() {
        for space in [euclid4(), minkowski()] {
            for radius_sq in [1.0, -2.5, 0.7] {
                let m = MobiusMap::generator(&space, &Generator::Inversion { radius_sq }).unwrap();
                let prod = MobiusMap::compose(&m, &m);
                let id = DMatrix::identity(6, 6);
                let dev_plus = (prod.matrix() - &id).norm();
                let dev_minus = (prod.matrix() + &id).norm();
                assert!(dev_plus.min(dev_minus) < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_generator_parameters() {
        let space = euclid4();
        assert!(MobiusMap::generator(&space, &Generator::Dilation(0.0)).is_err());
        assert!(MobiusMap::generator(&space, &Generator::Inversion { radius_sq: 0.0 }).is_err());
        assert!(MobiusMap::generator(
            &space,
            &Generator::Rotation {
                i: 1,
                j: 1,
                angle: 0.5
            }
        )
        .is_err());
        assert!(MobiusMap::generator(
            &space,
            &Generator::Rotation {
                i: 0,
                j: 9,
                angle: 0.5
            }
        )
        .is_err());
    }

    #[test]
    fn boost_preserves_minkowski_metric() {
        let space = minkowski();
        let m = MobiusMap::generator(
            &space,
            &Generator::Rotation {
                i: 0,
                j: 3,
                angle: 0.8,
            },
        )
        .unwrap();
        assert!(m.orthogonality_residual(&space) < 1e-13);
    }
}
