//! Exact small-system reference: partition function and correlation
//! functions of the periodic canonical ensemble by tensor quadrature.
//!
//! Integrands are smooth and periodic over the box, so the midpoint rule
//! refines spectrally. Translation invariance removes one particle's worth
//! of integration dimensions from the partition function.

use crate::error::{Error, Result};
use crate::geom::PointSet;
use crate::gibbs::{CorrelationEstimate, EnsembleSpec, EstimateMethod};
use crate::potential::lattice::{certified_shells, raw_image_sum, SumWindow};
use crate::potential::LatticeSumPolicy;
use crate::quad::{refine_integral, QuadratureParams};

pub struct QuadratureOracle {
    pub spec: EnsembleSpec,
    policy: LatticeSumPolicy,
    quad: QuadratureParams,
    shells: u32,
    z: f64,
    z_err: f64,
}

impl QuadratureOracle {
    /// Compute the partition function and freeze it in the oracle.
    pub fn new(
        spec: EnsembleSpec,
        policy: LatticeSumPolicy,
        quad: QuadratureParams,
    ) -> Result<Self> {
        spec.validate()?;
        let d = spec.geometry.dim();
        let n = spec.n_particles;
        if n >= 1 && (n - 1) * d > 6 {
            return Err(Error::Config(format!(
                "oracle partition function needs {} integration dims, cap is 6",
                (n - 1) * d
            )));
        }
        let shells = certified_shells(&spec.pot, &spec.geometry, &policy, SumWindow::Doubled)?;
        let (z, z_err) = partition_function(&spec, shells, &quad)?;
        Ok(QuadratureOracle {
            spec,
            policy,
            quad,
            shells,
            z,
            z_err,
        })
    }

    pub fn partition(&self) -> f64 {
        self.z
    }

    pub fn partition_error(&self) -> f64 {
        self.z_err
    }

    pub fn policy(&self) -> &LatticeSumPolicy {
        &self.policy
    }

    /// Periodic energy in the oracle's truncation.
    pub fn energy(&self, pts: &PointSet) -> f64 {
        energy_with_shells(pts, &self.spec, self.shells)
    }

    /// Pointwise correlation function of order `n <= N`: the normalized
    /// marginal density of `n` of the `N` particles, including the falling-
    /// factorial combinatorial prefactor.
    pub fn correlation(&self, pts: &PointSet) -> Result<f64> {
        let n = pts.len();
        let cap_n = self.spec.n_particles;
        let d = self.spec.geometry.dim();
        if n > cap_n {
            return Err(Error::Config(format!(
                "correlation order {n} exceeds particle count {cap_n}"
            )));
        }
        if n == 0 {
            return Ok(1.0);
        }
        let prefactor: f64 = ((cap_n - n + 1)..=cap_n).map(|k| k as f64).product();
        let free = cap_n - n;
        if free == 0 {
            return Ok(prefactor * (-self.spec.beta * self.energy(pts)).exp() / self.z);
        }
        if free * d > 6 {
            return Err(Error::Config(
                "correlation evaluation exceeds the 6-dimensional integration cap".into(),
            ));
        }
        let lambda = self.spec.geometry.half_side();
        let integrand = |xs: &[f64]| -> f64 {
            let mut all = pts.clone();
            for i in 0..free {
                all.push(&xs[i * d..(i + 1) * d]);
            }
            let u = energy_with_shells(&all, &self.spec, self.shells);
            (-self.spec.beta * u).exp()
        };
        let (integral, _) = refine_integral(free * d, -lambda, lambda, &self.quad, &integrand)?;
        Ok(prefactor * integral / self.z)
    }

    /// Gridded estimate: order 1 on a probe grid (constant by translation
    /// invariance), order 2 reduced to separations on an axis grid.
    pub fn correlation_estimate(&self, order: usize, grid: usize) -> Result<CorrelationEstimate> {
        let d = self.spec.geometry.dim();
        let lambda = self.spec.geometry.half_side();
        match order {
            0 => Ok(CorrelationEstimate {
                order: 0,
                separation_reduced: false,
                points: vec![vec![]],
                values: vec![1.0],
                errors: vec![0.0],
                method: EstimateMethod::Quadrature,
                bin_volume: 0.0,
            }),
            1 => {
                let mut points = Vec::new();
                let mut values = Vec::new();
                for k in 0..grid {
                    let x: Vec<f64> = (0..d)
                        .map(|axis| {
                            lambda
                                * (2.0 * ((k + axis + 1) as f64) / (grid as f64 + 1.0) - 1.0)
                        })
                        .collect();
                    let mut pts = PointSet::new(d);
                    pts.push(&x);
                    values.push(self.correlation(&pts)?);
                    points.push(x);
                }
                let errors = vec![self.z_err / self.z; values.len()];
                Ok(CorrelationEstimate {
                    order: 1,
                    separation_reduced: false,
                    points,
                    values,
                    errors,
                    method: EstimateMethod::Quadrature,
                    bin_volume: 0.0,
                })
            }
            2 => {
                let mut points = Vec::new();
                let mut values = Vec::new();
                // separations along the first axis, symmetric grid
                for k in 0..grid {
                    let s = lambda * (2.0 * (k as f64 + 0.5) / grid as f64 - 1.0);
                    let mut sep = vec![0.0; d];
                    sep[0] = s;
                    let mut pts = PointSet::new(d);
                    pts.push(&sep);
                    pts.push(&vec![0.0; d]);
                    values.push(self.correlation(&pts)?);
                    points.push(sep);
                }
                let errors = vec![self.z_err / self.z; values.len()];
                Ok(CorrelationEstimate {
                    order: 2,
                    separation_reduced: true,
                    points,
                    values,
                    errors,
                    method: EstimateMethod::Quadrature,
                    bin_volume: 0.0,
                })
            }
            n => Err(Error::Config(format!(
                "gridded oracle estimates support order <= 2, got {n}"
            ))),
        }
    }

    /// The pair correlation with the direct-pair Boltzmann factor divided
    /// out, evaluated stably by cancelling inside the exponent:
    /// `k2(x, 0) exp(beta phi_per(x))`. This stays finite down to contact,
    /// which is the content of the improved correlation bound.
    pub fn pair_core_ratio(&self, sep: &[f64]) -> Result<f64> {
        let d = self.spec.geometry.dim();
        let n = self.spec.n_particles;
        if n < 2 {
            return Err(Error::Config("pair ratio needs at least two particles".into()));
        }
        let prefactor: f64 = ((n - 1)..=n).map(|k| k as f64).product();
        let free = n - 2;
        let mut pair = PointSet::new(d);
        pair.push(sep);
        pair.push(&vec![0.0; d]);
        if free == 0 {
            return Ok(prefactor / self.z);
        }
        let lambda = self.spec.geometry.half_side();
        let integrand = |xs: &[f64]| -> f64 {
            // cross energy of the free particles against the fixed pair and
            // among themselves; the direct pair term never enters, so no
            // cancellation against the diverging core
            let mut all = pair.clone();
            for i in 0..free {
                all.push(&xs[i * d..(i + 1) * d]);
            }
            let mut cross = 0.0;
            let mut delta = vec![0.0; d];
            for i in 0..all.len() {
                for j in (i + 1)..all.len() {
                    if i == 0 && j == 1 {
                        continue;
                    }
                    for k in 0..d {
                        delta[k] = all.point(i)[k] - all.point(j)[k];
                    }
                    cross += raw_image_sum(&delta, &self.spec.pot, &self.spec.geometry, self.shells, false);
                }
            }
            if !cross.is_finite() {
                return 0.0;
            }
            (-self.spec.beta * cross).exp()
        };
        let (integral, _) = refine_integral(free * d, -lambda, lambda, &self.quad, &integrand)?;
        Ok(prefactor * integral / self.z)
    }

    /// Both sides of the marginalization identity at a tuple: integrating
    /// the next-order correlation over the box against its last argument
    /// versus `(N - n)` times the correlation at the tuple.
    pub fn marginalization_sides(&self, pts: &PointSet) -> Result<(f64, f64)> {
        let d = self.spec.geometry.dim();
        let lambda = self.spec.geometry.half_side();
        let n = pts.len();
        let rhs = (self.spec.n_particles - n) as f64 * self.correlation(pts)?;
        let integrand = |xs: &[f64]| -> f64 {
            let mut all = pts.clone();
            all.push(&xs[0..d]);
            self.correlation(&all).unwrap_or(f64::NAN)
        };
        let (lhs, _) = refine_integral(d, -lambda, lambda, &self.quad, &integrand)?;
        Ok((lhs, rhs))
    }
}

impl crate::observables::CorrelationKernel for QuadratureOracle {
    fn max_order(&self) -> usize {
        self.spec.n_particles
    }
    fn eval(&self, points: &PointSet) -> f64 {
        self.correlation(points).unwrap_or(f64::NAN)
    }
}

/// Orders one and two of the oracle frozen into tables, so correlation
/// kernels can be evaluated inside other quadratures without nesting
/// refinement loops. One-dimensional boxes only; the pair table is indexed
/// by the wrapped separation.
pub struct TabulatedKernel {
    geometry: crate::geom::BoxGeometry,
    order_one: f64,
    sep_grid: Vec<f64>,
    pair_values: Vec<f64>,
}

impl QuadratureOracle {
    pub fn tabulated(&self, pair_grid: usize) -> Result<TabulatedKernel> {
        let d = self.spec.geometry.dim();
        if d != 1 {
            return Err(Error::Config("tabulated kernel supports dim = 1".into()));
        }
        let mut probe = PointSet::new(1);
        probe.push(&[0.1]);
        let order_one = self.correlation(&probe)?;
        let lambda = self.spec.geometry.half_side();
        let mut sep_grid = Vec::with_capacity(pair_grid + 1);
        let mut pair_values = Vec::with_capacity(pair_grid + 1);
        for k in 0..=pair_grid {
            let s = -lambda + 2.0 * lambda * k as f64 / pair_grid as f64;
            let mut pts = PointSet::new(1);
            pts.push(&[s]);
            pts.push(&[0.0]);
            sep_grid.push(s);
            pair_values.push(if s == -lambda || s == lambda || s == 0.0 {
                // exact boundary duplicates its wrapped partner; contact is
                // evaluated a hair off the singular point
                let eps = 1e-9;
                let mut p = PointSet::new(1);
                p.push(&[s + eps]);
                p.push(&[0.0]);
                self.correlation(&p)?
            } else {
                self.correlation(&pts)?
            });
        }
        Ok(TabulatedKernel {
            geometry: self.spec.geometry,
            order_one,
            sep_grid,
            pair_values,
        })
    }
}

impl crate::observables::CorrelationKernel for TabulatedKernel {
    fn max_order(&self) -> usize {
        2
    }
    fn eval(&self, points: &PointSet) -> f64 {
        match points.len() {
            0 => 1.0,
            1 => self.order_one,
            2 => {
                let delta =
                    self.geometry.min_image_delta(points.point(0), points.point(1));
                let s = delta[0];
                let lambda = self.geometry.half_side();
                let n = self.sep_grid.len();
                let u = (s + lambda) / (2.0 * lambda) * (n - 1) as f64;
                let k = (u.floor() as usize).min(n - 2);
                let w = u - k as f64;
                (1.0 - w) * self.pair_values[k] + w * self.pair_values[k + 1]
            }
            _ => f64::NAN,
        }
    }
}

fn energy_with_shells(pts: &PointSet, spec: &EnsembleSpec, shells: u32) -> f64 {
    let d = pts.dim();
    let n = pts.len();
    let mut delta = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..d {
                delta[k] = pts.point(i)[k] - pts.point(j)[k];
            }
            total += raw_image_sum(&delta, &spec.pot, &spec.geometry, shells, false);
            if total.is_infinite() {
                return f64::INFINITY;
            }
        }
    }
    total
}

fn partition_function(
    spec: &EnsembleSpec,
    shells: u32,
    quad: &QuadratureParams,
) -> Result<(f64, f64)> {
    let d = spec.geometry.dim();
    let n = spec.n_particles;
    let volume = spec.geometry.volume();
    match n {
        0 => Ok((1.0, 0.0)),
        1 => Ok((volume, 0.0)),
        _ => {
            // pin the last particle at the origin by translation invariance
            let lambda = spec.geometry.half_side();
            let dims = (n - 1) * d;
            let integrand = |xs: &[f64]| -> f64 {
                let mut pts = PointSet::new(d);
                for i in 0..(n - 1) {
                    pts.push(&xs[i * d..(i + 1) * d]);
                }
                pts.push(&vec![0.0; d]);
                let u = energy_with_shells(&pts, spec, shells);
                (-spec.beta * u).exp()
            };
            let (integral, err) = refine_integral(dims, -lambda, lambda, quad, &integrand)?;
            Ok((volume * integral, volume * err))
        }
    }
}
