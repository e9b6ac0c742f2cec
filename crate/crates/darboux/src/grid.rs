//! Rectangular parameter grids with a fixed deterministic ordering.

use nalgebra::DVector;

use crate::error::GeometryError;

/// Evenly spaced sample grid over a box domain, iterated in odometer order
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Vec<(f64, f64)>,
    resolution: Vec<usize>,
}

impl Grid {
    /// Requires a resolution of at least 2 per axis.
    pub fn new(domain: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Self, GeometryError> {
        if domain.len() != resolution.len() {
            return Err(GeometryError::dim_mismatch(
                domain.len(),
                resolution.len(),
                "grid axes",
            ));
        }
        if domain.is_empty() {
            return Err(GeometryError::InvalidParameter("empty grid".into()));
        }
        for (lo, hi) in &domain {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(GeometryError::InvalidParameter(format!(
                    "grid range [{lo}, {hi}] must be nonempty"
                )));
            }
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(GeometryError::InvalidParameter(
                "grid resolution must be at least 2 per axis".into(),
            ));
        }
        Ok(Grid { domain, resolution })
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// The grid point with flat index `idx`. Endpoints are the exact domain
    /// bounds (no floating-point overshoot).
    pub fn point(&self, idx: usize) -> DVector<f64> {
        let d = self.dim();
        let mut u = DVector::zeros(d);
        let mut rem = idx;
        for k in (0..d).rev() {
            let r = self.resolution[k];
            let i = rem % r;
            rem /= r;
            let (lo, hi) = self.domain[k];
            u[k] = if i == r - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (r - 1) as f64
            };
        }
        u
    }

    pub fn points(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Grid points at least `margin` inside every face, with their flat
    /// indices.
    pub fn interior_points(&self, margin: f64) -> Vec<(usize, DVector<f64>)> {
        (0..self.len())
            .map(|i| (i, self.point(i)))
            .filter(|(_, u)| {
                self.domain
                    .iter()
                    .zip(u.iter())
                    .all(|((lo, hi), v)| *lo + margin <= *v && *v <= *hi - margin)
            })
            .collect()
    }
}
