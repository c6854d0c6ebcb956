//! Deterministic tensor-grid quadrature.
//!
//! Integrands over the periodic cube are smooth and periodic, so the uniform
//! midpoint rule converges spectrally; refinement doubles the per-axis grid
//! and the difference between successive levels serves as the error estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureParams {
    /// Starting points per axis.
    pub n_start: usize,
    /// How many times the grid may be doubled.
    pub max_doublings: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Evaluation budget: refinement stops before a level whose total grid
    /// would exceed this.
    pub max_points: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            n_start: 16,
            max_doublings: 6,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_points: 40_000_000,
        }
    }
}

impl QuadratureParams {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureParams {
            rel_tol,
            ..Default::default()
        }
    }
}

/// Midpoint rule over `[lo, hi]^dim` with `n` points per axis.
/// The outermost axis is parallelized; partial sums are reduced in index
/// order so the result does not depend on the thread count.
pub fn tensor_midpoint<F>(dim: usize, lo: f64, hi: f64, n: usize, f: &F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(dim >= 1);
    let h = (hi - lo) / n as f64;
    let weight = h.powi(dim as i32);
    let coord = |k: usize| lo + (k as f64 + 0.5) * h;

    let slice_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k0| {
            let mut x = vec![0.0; dim];
            x[0] = coord(k0);
            if dim == 1 {
                return f(&x);
            }
            let inner = dim - 1;
            let mut idx = vec![0usize; inner];
            let total: usize = n.pow(inner as u32);
            let mut acc = 0.0;
            for _ in 0..total {
                for (i, &k) in idx.iter().enumerate() {
                    x[i + 1] = coord(k);
                }
                acc += f(&x);
                // odometer increment
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < n {
                        break;
                    }
                    *slot = 0;
                }
            }
            acc
        })
        .collect();

    slice_sums.iter().sum::<f64>() * weight
}

/// Integral over the cube with Richardson-style doubling until the change
/// between refinements meets the tolerance. Returns (value, error estimate).
pub fn refine_integral<F>(
    dim: usize,
    lo: f64,
    hi: f64,
    params: &QuadratureParams,
    f: &F,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut n = params.n_start.max(2);
    let mut prev = tensor_midpoint(dim, lo, hi, n, f);
    let mut best_err = f64::INFINITY;
    for _ in 0..params.max_doublings {
        n *= 2;
        if (n as f64).powi(dim as i32) > params.max_points as f64 {
            break;
        }
        let cur = tensor_midpoint(dim, lo, hi, n, f);
        best_err = (cur - prev).abs();
        let tol = params.abs_tol.max(params.rel_tol * cur.abs());
        if best_err <= tol {
            return Ok((cur, best_err));
        }
        prev = cur;
    }
    let tol = params.abs_tol.max(params.rel_tol * prev.abs());
    if best_err <= tol {
        Ok((prev, best_err))
    } else {
        Err(Error::QuadratureNotConverged {
            estimate: prev,
            error: best_err,
            tol,
        })
    }
}

/// Gaussian window half width, in standard deviations, used when replacing
/// the velocity integral over `R^d` by a finite grid.
const GAUSS_WINDOW_SIGMAS: f64 = 8.5;

/// Expectation of `f` under the product Gaussian `N(0, 1/beta)^dim`.
///
/// Self-normalizing: the numeric Gaussian mass on the window divides out
/// the truncation of the ideal normalizer.
pub fn gaussian_expectation<F>(dim: usize, beta: f64, n: usize, f: &F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let sigma = (1.0 / beta).sqrt();
    let l = GAUSS_WINDOW_SIGMAS * sigma;
    let num = tensor_midpoint(dim, -l, l, n, &|v: &[f64]| {
        let q: f64 = v.iter().map(|x| x * x).sum();
        f(v) * (-0.5 * beta * q).exp()
    });
    let den = tensor_midpoint(dim, -l, l, n, &|v: &[f64]| {
        let q: f64 = v.iter().map(|x| x * x).sum();
        (-0.5 * beta * q).exp()
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_integrates_constants_exactly() {
        let v = tensor_midpoint(2, -1.0, 1.0, 8, &|_x| 3.0);
        assert!((v - 12.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_integrand_converges_fast() {
        // smooth periodic function over its period
        let f = |x: &[f64]| (std::f64::consts::PI * x[0]).cos().exp();
        let (v, err) = refine_integral(1, -1.0, 1.0, &QuadratureParams::default(), &f).unwrap();
        // modified Bessel I0(1) * 2
        let reference = 2.0 * 1.2660658777520083;
        assert!((v - reference).abs() < 1e-9, "v={v} err={err}");
    }

    #[test]
    fn gaussian_moments() {
        let beta = 2.0;
        let m2 = gaussian_expectation(1, beta, 96, &|v| v[0] * v[0]);
        assert!((m2 - 1.0 / beta).abs() < 1e-10);
        let m4 = gaussian_expectation(1, beta, 96, &|v| v[0].powi(4));
        assert!((m4 - 3.0 / (beta * beta)).abs() < 1e-9);
    }

    #[test]
    fn nonsmooth_integrand_reports_failure() {
        let params = QuadratureParams {
            n_start: 4,
            max_doublings: 1,
            rel_tol: 1e-14,
            abs_tol: 1e-16,
            ..Default::default()
        };
        let f = |x: &[f64]| if x[0] > 0.337 { 1.0 } else { 0.0 };
        assert!(refine_integral(1, -1.0, 1.0, &params, &f).is_err());
    }
}
