//! Periodic box geometry, point sets and the minimum-image convention.
//!
//! The simulation cell is the half-open cube `(-lambda, lambda]^d` with the
//! maximum norm; opposite faces are identified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum norm of a vector.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Euclidean norm of a vector.
pub fn eucl_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Periodic cube `(-lambda, lambda]^d` under the maximum norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    dim: usize,
    half_side: f64,
}

impl BoxGeometry {
    pub fn new(dim: usize, half_side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("box dimension must be positive".into()));
        }
        if !(half_side > 0.0) {
            return Err(Error::Config("box half side must be positive".into()));
        }
        Ok(BoxGeometry { dim, half_side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half side `lambda`.
    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    /// Full side `2 lambda`.
    pub fn side(&self) -> f64 {
        2.0 * self.half_side
    }

    /// Volume `(2 lambda)^d`.
    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// Map one coordinate into `(-lambda, lambda]`.
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let side = self.side();
        let mut y = x - side * ((x - self.half_side) / side).ceil();
        // guard against rounding right at the boundary
        if y > self.half_side {
            y -= side;
        }
        if y <= -self.half_side {
            y += side;
        }
        y
    }

    /// Wrap a point into the box, in place.
    pub fn wrap(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for c in x.iter_mut() {
            *c = self.wrap_coord(*c);
        }
    }

    /// Wrapped copy of a point.
    pub fn wrapped(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.wrap(&mut y);
        y
    }

    /// Whether a point lies in `(-lambda, lambda]^d` as stored.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .all(|&c| -self.half_side < c && c <= self.half_side)
    }

    /// Minimum-image separation `x - y` wrapped into `(-lambda, lambda]^d`.
    ///
    /// Inputs are wrapped first, so arbitrary representatives are accepted.
    pub fn min_image_delta(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let mut delta = vec![0.0; self.dim];
        for i in 0..self.dim {
            delta[i] = self.wrap_coord(self.wrap_coord(x[i]) - self.wrap_coord(y[i]));
        }
        delta
    }
}

/// Minimum-image separation as a free function.
pub fn min_image_delta(x: &[f64], y: &[f64], geometry: &BoxGeometry) -> Vec<f64> {
    geometry.min_image_delta(x, y)
}

/// A flat list of `n` points in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Config(format!(
                "flat point data of length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::Config("point has wrong dimension".into()));
            }
            data.extend_from_slice(p);
        }
        Ok(PointSet { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Whether any two points coincide exactly.
    pub fn has_coincidence(&self) -> Option<(usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.point(i) == self.point(j) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// An axis-aligned observation window, half open like the box: `(lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Config("window must satisfy lo < hi componentwise".into()));
        }
        Ok(Window { lo, hi })
    }

    /// Centered cube `(-w, w]^d`.
    pub fn centered(dim: usize, w: f64) -> Self {
        Window {
            lo: vec![-w; dim],
            hi: vec![w; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&c, (&l, &h))| l < c && c <= h)
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    /// Whether the window is contained in the box `(-lambda, lambda]^d`.
    pub fn fits_in(&self, geometry: &BoxGeometry) -> bool {
        let l = geometry.half_side();
        self.dim() == geometry.dim()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .all(|(&lo, &hi)| lo >= -l && hi <= l)
    }
}
