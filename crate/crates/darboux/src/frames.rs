//! Conformal moving frames attached to a hypersurface point, the central
//! tangent hypersphere, and numerical verification of the connection and
//! structure relations.
//!
//! A first-order frame at x consists of the null points A_0 = lift(x) and
//! A_{n+1} = e_plus, the normal hyperspheres A_i = t_i + G(x, t_i) e_plus,
//! and the tangent hypersphere A_n = nu + G(x, nu) e_plus. When the normal
//! is timelike the paper's sign convention applies: frame pairings are
//! evaluated with the negated ambient form and A_0 is replaced by -A_0, so
//! every stated frame condition holds verbatim with the sign-flipped metric
//! stored on [`FundamentalData`].
//!
//! A second-order frame replaces the tangent-sphere slot by the central
//! tangent hypersphere C_n = A_n + lambda A_0. Keeping the frame conditions
//! intact then forces the companion move
//! `A_{n+1}' = A_{n+1} + (lambda^2 / 2) A_0 + lambda A_n`, and with respect
//! to the completed frame the tangency slot of the connection carries the
//! trace-free form h instead of lambda.

use nalgebra::{DMatrix, DVector};

use crate::bilinear::SymForm;
use crate::error::GeometryError;
use crate::hypersurface::{fundamental_forms, FundamentalData, Immersion, SurfaceJet};
use crate::mobius::{AmbientSpace, LightConeVector, MobiusMap};

/// Frame order: first-order carries the raw tangent sphere, second-order
/// the central tangent sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameOrder {
    First,
    Second,
}

/// The moving frame (A_0, A_1..A_{n-1}, A_n | C_n, A_{n+1}) at one point.
#[derive(Debug, Clone)]
pub struct ConformalFrame {
    space: AmbientSpace,
    order: FrameOrder,
    /// Sign convention of the frame pairing (the normal's causal type).
    epsilon: f64,
    a0: LightConeVector,
    ai: Vec<LightConeVector>,
    /// Tangent-sphere slot: A_n at first order, C_n at second order.
    an: LightConeVector,
    an1: LightConeVector,
    /// The central sphere, populated at second order.
    cn: Option<LightConeVector>,
}

impl ConformalFrame {
    pub fn order(&self) -> FrameOrder {
        self.order
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a0(&self) -> &LightConeVector {
        &self.a0
    }

    pub fn ai(&self) -> &[LightConeVector] {
        &self.ai
    }

    pub fn an(&self) -> &LightConeVector {
        &self.an
    }

    pub fn an1(&self) -> &LightConeVector {
        &self.an1
    }

    pub fn cn(&self) -> Option<&LightConeVector> {
        self.cn.as_ref()
    }

    /// Frame pairing: the ambient pairing with the epsilon sign convention.
    pub fn pair(&self, x: &LightConeVector, y: &LightConeVector) -> f64 {
        self.epsilon * self.space.pair(x, y)
    }

    /// All frame vectors in row order (A_0, A_i.., A_n, A_{n+1}).
    pub fn rows(&self) -> Vec<&LightConeVector> {
        let mut rows = Vec::with_capacity(self.space.dim() + 2);
        rows.push(&self.a0);
        rows.extend(self.ai.iter());
        rows.push(&self.an);
        rows.push(&self.an1);
        rows
    }

    /// The (n+2)x(n+2) matrix with frame vectors as rows, in ambient
    /// coordinates.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.space.dim() + 2;
        let mut f = DMatrix::zeros(m, m);
        for (r, v) in self.rows().into_iter().enumerate() {
            f.row_mut(r).copy_from(&v.to_coords().transpose());
        }
        f
    }

    /// Applies a Moebius map to every frame vector. Pairings, and hence all
    /// frame residuals, are unchanged.
    pub fn transformed(&self, map: &MobiusMap) -> ConformalFrame {
        ConformalFrame {
            space: self.space,
            order: self.order,
            epsilon: self.epsilon,
            a0: map.apply(&self.a0),
            ai: self.ai.iter().map(|v| map.apply(v)).collect(),
            an: map.apply(&self.an),
            an1: map.apply(&self.an1),
            cn: self.cn.as_ref().map(|v| map.apply(v)),
        }
    }
}

/// Builds the conformal frame of the requested order from the exact jet and
/// fundamental data of a nonisotropic point.
pub fn build_frame(
    space: &AmbientSpace,
    jet: &SurfaceJet,
    data: &FundamentalData,
    order: FrameOrder,
) -> ConformalFrame {
    let epsilon = data.epsilon;
    let lifted = space.lift_point(&jet.x);
    let a0 = if epsilon < 0.0 {
        lifted.scale(-1.0)
    } else {
        lifted
    };
    let ai = jet
        .tangents
        .iter()
        .map(|t| LightConeVector::new(0.0, t.clone(), space.dot(&jet.x, t)))
        .collect();
    let an = LightConeVector::new(0.0, data.normal.clone(), space.dot(&jet.x, &data.normal));
    let an1 = space.e_plus();

    let mut frame = ConformalFrame {
        space: *space,
        order: FrameOrder::First,
        epsilon,
        a0,
        ai,
        an,
        an1,
        cn: None,
    };
    if order == FrameOrder::Second {
        let lambda = data.lambda_mean;
        let cn = central_sphere(&frame, lambda);
        // Completing the frame: keep (A_{n+1}, C_n) = 0 and A_{n+1} null.
        let an1 = frame
            .an1
            .axpy(0.5 * lambda * lambda, &frame.a0)
            .axpy(lambda, &frame.an);
        frame.an1 = an1;
        frame.an = cn.clone();
        frame.cn = Some(cn);
        frame.order = FrameOrder::Second;
    }
    frame
}

/// The central tangent hypersphere C_n = A_n + lambda A_0 of a first-order
/// frame; satisfies (C_n, C_n) = 1 and (C_n, A_0) = 0, and its second-order
/// tangency directions are the cone h = 0.
pub fn central_sphere(frame: &ConformalFrame, lambda_mean: f64) -> LightConeVector {
    let base = match frame.order {
        FrameOrder::First => &frame.an,
        FrameOrder::Second => frame.cn.as_ref().expect("second-order frame carries cn"),
    };
    if frame.order == FrameOrder::Second {
        return base.clone();
    }
    frame.an.axpy(lambda_mean, &frame.a0)
}

/// Maximum violations of each frame condition.
#[derive(Debug, Clone, Copy)]
pub struct FrameResiduals {
    /// (A_0, A_0) and (A_{n+1}, A_{n+1}).
    pub null_points: f64,
    /// (A_0, A_i), (A_{n+1}, A_i), (A_0, A_n), (A_{n+1}, A_n).
    pub incidences: f64,
    /// (A_i, A_n).
    pub tangent_orthogonality: f64,
    /// (A_0, A_{n+1}) + 1.
    pub normalization: f64,
    /// (A_n, A_n) - 1.
    pub tangent_sphere_norm: f64,
    /// max_ij |(A_i, A_j) - g_ij|.
    pub metric_match: f64,
}

impl FrameResiduals {
    pub fn max_violation(&self) -> f64 {
        self.null_points
            .max(self.incidences)
            .max(self.tangent_orthogonality)
            .max(self.normalization)
            .max(self.tangent_sphere_norm)
            .max(self.metric_match)
    }
}

/// Evaluates every frame condition against the given metric block.
pub fn frame_residuals(frame: &ConformalFrame, g: &SymForm) -> FrameResiduals {
    let d = frame.ai.len();
    let null_points = frame
        .pair(&frame.a0, &frame.a0)
        .abs()
        .max(frame.pair(&frame.an1, &frame.an1).abs());
    let mut incidences = frame
        .pair(&frame.a0, &frame.an)
        .abs()
        .max(frame.pair(&frame.an1, &frame.an).abs());
    let mut tangent_orthogonality = 0.0_f64;
    let mut metric_match = 0.0_f64;
    for i in 0..d {
        incidences = incidences
            .max(frame.pair(&frame.a0, &frame.ai[i]).abs())
            .max(frame.pair(&frame.an1, &frame.ai[i]).abs());
        tangent_orthogonality =
            tangent_orthogonality.max(frame.pair(&frame.ai[i], &frame.an).abs());
        for j in 0..d {
            metric_match =
                metric_match.max((frame.pair(&frame.ai[i], &frame.ai[j]) - g.entry(i, j)).abs());
        }
    }
    FrameResiduals {
        null_points,
        incidences,
        tangent_orthogonality,
        normalization: (frame.pair(&frame.a0, &frame.an1) + 1.0).abs(),
        tangent_sphere_norm: (frame.pair(&frame.an, &frame.an) - 1.0).abs(),
        metric_match,
    }
}

/// Connection matrices Omega_k (one per parameter direction) obtained from
/// the frame field by central differences: Omega_k = (d_k F) F^{-1} in the
/// row convention dF = Omega F.
#[derive(Debug, Clone)]
pub struct ConnectionSlice {
    /// One (n+2)x(n+2) matrix per parameter direction.
    pub omegas: Vec<DMatrix<f64>>,
    /// Metric block at the evaluation point.
    pub g: SymForm,
    /// Analytic tangency form at the point (lambda at first order, h at
    /// second order is recovered separately; this field always stores the
    /// fundamental data's lambda).
    pub lambda: SymForm,
    /// Trace-free form at the point.
    pub h: SymForm,
    pub order: FrameOrder,
}

impl ConnectionSlice {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    /// omega_0^n evaluated on each coordinate direction; vanishes for
    /// first-order frames up to the finite-difference error.
    pub fn omega_0n_max(&self) -> f64 {
        let n = self.dim() + 1;
        self.omegas
            .iter()
            .map(|o| o[(0, n)].abs())
            .fold(0.0, f64::max)
    }

    /// omega_0^{n+1} components (must vanish identically).
    pub fn omega_0np1_max(&self) -> f64 {
        let n = self.dim() + 1;
        self.omegas
            .iter()
            .map(|o| o[(0, n + 1)].abs())
            .fold(0.0, f64::max)
    }

    /// omega_n^n components (must vanish identically).
    pub fn omega_nn_max(&self) -> f64 {
        let n = self.dim() + 1;
        self.omegas
            .iter()
            .map(|o| o[(n, n)].abs())
            .fold(0.0, f64::max)
    }

    /// Residual of omega_i^{n+1} = g_ij omega_0^j over all directions.
    pub fn first_order_relation_max(&self) -> f64 {
        let d = self.dim();
        let n = d + 1;
        let mut worst = 0.0_f64;
        for omega in &self.omegas {
            for i in 0..d {
                let mut rhs = 0.0;
                for j in 0..d {
                    rhs += self.g.entry(i, j) * omega[(0, 1 + j)];
                }
                worst = worst.max((omega[(1 + i, n + 1)] - rhs).abs());
            }
        }
        worst
    }

    /// Extracts the tangency coefficients from omega_i^n = c_ij omega_0^j by
    /// solving against the basis-form matrix B[j][k] = omega_0^j(d_k).
    /// First-order frames recover lambda_ij, second-order frames h_ij.
    pub fn extract_tangency_form(&self) -> Result<DMatrix<f64>, GeometryError> {
        let d = self.dim();
        let n = d + 1;
        let mut basis = DMatrix::zeros(d, d);
        let mut target = DMatrix::zeros(d, d);
        for (k, omega) in self.omegas.iter().enumerate() {
            for j in 0..d {
                basis[(j, k)] = omega[(0, 1 + j)];
            }
            for i in 0..d {
                target[(i, k)] = omega[(1 + i, n)];
            }
        }
        // c = target * basis^{-1}.
        let inv = basis
            .try_inverse()
            .ok_or_else(|| GeometryError::SingularFrame { at: Vec::new() })?;
        Ok(target * inv)
    }

    /// Asymmetry of the extracted tangency coefficients (the symmetry is a
    /// consequence of the structure equations, verified rather than assumed).
    pub fn tangency_symmetry_residual(&self) -> Result<f64, GeometryError> {
        let c = self.extract_tangency_form()?;
        Ok((&c - c.transpose()).norm())
    }
}

/// Frame field sample used by the finite-difference machinery.
fn frame_at(
    imm: &Immersion,
    space: &AmbientSpace,
    u: &DVector<f64>,
    order: FrameOrder,
    det_eps: Option<f64>,
) -> Result<ConformalFrame, GeometryError> {
    let jet = imm.jet_at_unchecked(u)?;
    let data = fundamental_forms(space, &jet, det_eps).map_err(|e| match e {
        GeometryError::IsotropicPoint { det, threshold, .. } => GeometryError::IsotropicPoint {
            at: u.as_slice().to_vec(),
            det,
            threshold,
        },
        other => other,
    })?;
    Ok(build_frame(space, &jet, &data, order))
}

/// Computes the connection matrices at `u` from the frame field by central
/// differences of the given step.
pub fn connection_at(
    imm: &Immersion,
    u: &DVector<f64>,
    step: f64,
    order: FrameOrder,
) -> Result<ConnectionSlice, GeometryError> {
    if step <= 0.0 {
        return Err(GeometryError::InvalidParameter(
            "finite-difference step must be positive".into(),
        ));
    }
    if !imm.contains_with_margin(u, step) {
        return Err(GeometryError::DomainError(format!(
            "point {:?} lacks margin {step} to the domain boundary",
            u.as_slice()
        )));
    }
    let space = *imm.space();
    let d = imm.param_dim();

    let jet = imm.jet_at_unchecked(u)?;
    let data = fundamental_forms(&space, &jet, None)?;
    let f = frame_at(imm, &space, u, order, None)?.matrix();
    let f_inv = f
        .clone()
        .try_inverse()
        .ok_or_else(|| GeometryError::SingularFrame {
            at: u.as_slice().to_vec(),
        })?;

    let mut omegas = Vec::with_capacity(d);
    for k in 0..d {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[k] += step;
        dn[k] -= step;
        let f_up = frame_at(imm, &space, &up, order, None)?.matrix();
        let f_dn = frame_at(imm, &space, &dn, order, None)?.matrix();
        let df = (f_up - f_dn) / (2.0 * step);
        omegas.push(df * &f_inv);
    }
    Ok(ConnectionSlice {
        omegas,
        g: data.g.clone(),
        lambda: data.lambda.clone(),
        h: data.h.clone(),
        order,
    })
}

/// Residual of the structure equations at `u`:
/// `max_{k<l} | d_k Omega_l - d_l Omega_k - (Omega_k Omega_l - Omega_l Omega_k) |`
/// with all derivatives central differences at the given step. Second-order
/// accurate: the residual is O(step^2).
pub fn structure_residual(
    imm: &Immersion,
    u: &DVector<f64>,
    step: f64,
) -> Result<f64, GeometryError> {
    if !imm.contains_with_margin(u, 2.0 * step) {
        return Err(GeometryError::DomainError(format!(
            "point {:?} lacks margin {} to the domain boundary",
            u.as_slice(),
            2.0 * step
        )));
    }
    let d = imm.param_dim();
    let omega_at = |v: &DVector<f64>| -> Result<Vec<DMatrix<f64>>, GeometryError> {
        Ok(connection_at(imm, v, step, FrameOrder::First)?.omegas)
    };
    let center = omega_at(u)?;

    // d_k Omega_l for all (k, l).
    let mut derivs: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[k] += step;
        dn[k] -= step;
        let omega_up = omega_at(&up)?;
        let omega_dn = omega_at(&dn)?;
        derivs.push(
            omega_up
                .into_iter()
                .zip(omega_dn)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect(),
        );
    }

    let mut worst = 0.0_f64;
    for k in 0..d {
        for l in (k + 1)..d {
            let lhs = &derivs[k][l] - &derivs[l][k];
            let rhs = &center[k] * &center[l] - &center[l] * &center[k];
            let residual = (lhs - rhs).amax();
            worst = worst.max(residual);
        }
    }
    Ok(worst)
}
