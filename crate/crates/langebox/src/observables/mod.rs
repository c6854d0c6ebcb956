//! Cylinder observables and the K-transform calculus.
//!
//! Test functions have spatially bounded support, analytic first and second
//! velocity derivatives and analytic spatial gradients; the analytic forms
//! are checked against central finite differences at construction so the
//! generator evaluation never inherits finite-difference noise.

pub mod generator;
pub mod lp;

pub use generator::{apply_generator, apply_generator_periodic};
pub use lp::{lp_integral, moment_expansion, CorrelationKernel, LpIntensity};

use serde::{Deserialize, Serialize};

use crate::configspace::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::geom::Window;

/// Compactly supported spatial factor: Gaussian profile times a C^2 cube
/// bump, so the support is exactly the cube of `support_radius` around the
/// center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialProfile {
    pub center: Vec<f64>,
    pub gauss_width: f64,
    pub support_radius: f64,
}

impl SpatialProfile {
    fn bump_terms(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        // returns (prod of b(u_i), per-axis b'(u_i)/b(u_i) replacement terms)
        let d = x.len();
        let mut prod = 1.0;
        let mut partial = vec![0.0; d];
        let mut factors = vec![0.0; d];
        for i in 0..d {
            let u = (x[i] - self.center[i]) / self.support_radius;
            if u.abs() >= 1.0 {
                return None;
            }
            let w = 1.0 - u * u;
            factors[i] = w * w * w;
            partial[i] = -6.0 * u * w * w / self.support_radius;
            prod *= factors[i];
        }
        // partial_i of the bump product = (b'(u_i)/R) * prod_{j != i} b(u_j)
        let mut grads = vec![0.0; d];
        for i in 0..d {
            let mut others = 1.0;
            for j in 0..d {
                if j != i {
                    others *= factors[j];
                }
            }
            grads[i] = partial[i] * others;
        }
        Some((prod, grads))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.bump_terms(x) {
            None => 0.0,
            Some((bump, _)) => {
                let q: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                (-0.5 * q / (self.gauss_width * self.gauss_width)).exp() * bump
            }
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self.bump_terms(x) {
            None => out.fill(0.0),
            Some((bump, bump_grad)) => {
                let s2 = self.gauss_width * self.gauss_width;
                let q: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                let g = (-0.5 * q / s2).exp();
                for i in 0..x.len() {
                    let dc = x[i] - self.center[i];
                    out[i] = g * (-dc / s2) * bump + g * bump_grad[i];
                }
            }
        }
    }

    pub fn support(&self) -> Window {
        let lo = self
            .center
            .iter()
            .map(|c| c - self.support_radius)
            .collect();
        let hi = self
            .center
            .iter()
            .map(|c| c + self.support_radius)
            .collect();
        Window { lo, hi }
    }
}

/// Velocity factor: bounded, with bounded first and second derivatives.
/// `q` below is `|v|^2 / scale^2` and `C(q) = (1+q)^{-2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VelocityProfile {
    /// Constant one: observables of position only.
    One,
    /// `v_axis * C(q)`; odd in the chosen axis.
    Coord { axis: usize, scale: f64 },
    /// `|v|^2 * C(q)`; an energy-like mark.
    SpeedSquared { scale: f64 },
}

impl VelocityProfile {
    fn c_terms(q: f64) -> (f64, f64, f64) {
        let b = 1.0 + q;
        ((b * b).recip(), -2.0 / (b * b * b), 6.0 / (b * b * b * b))
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match *self {
            VelocityProfile::One => 1.0,
            VelocityProfile::Coord { axis, scale } => {
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / (scale * scale);
                let (c, _, _) = Self::c_terms(q);
                v[axis] * c
            }
            VelocityProfile::SpeedSquared { scale } => {
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / (scale * scale);
                let (c, _, _) = Self::c_terms(q);
                v.iter().map(|c2| c2 * c2).sum::<f64>() * c
            }
        }
    }

    pub fn grad(&self, v: &[f64], out: &mut [f64]) {
        match *self {
            VelocityProfile::One => out.fill(0.0),
            VelocityProfile::Coord { axis, scale } => {
                let s2 = scale * scale;
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / s2;
                let (c, cp, _) = Self::c_terms(q);
                for i in 0..v.len() {
                    let dq = 2.0 * v[i] / s2;
                    out[i] = cp * dq * v[axis];
                }
                out[axis] += c;
            }
            VelocityProfile::SpeedSquared { scale } => {
                let s2 = scale * scale;
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / s2;
                let (c, cp, _) = Self::c_terms(q);
                let speed2: f64 = v.iter().map(|c2| c2 * c2).sum();
                for i in 0..v.len() {
                    let dq = 2.0 * v[i] / s2;
                    out[i] = 2.0 * v[i] * c + speed2 * cp * dq;
                }
            }
        }
    }

    pub fn laplacian(&self, v: &[f64]) -> f64 {
        let d = v.len() as f64;
        match *self {
            VelocityProfile::One => 0.0,
            VelocityProfile::Coord { axis, scale } => {
                let s2 = scale * scale;
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / s2;
                let (_, cp, cpp) = Self::c_terms(q);
                // laplacian of v_a C: 4 C' v_a / s2 + 4 v_a C'' q / s2 + 2 d v_a C' / s2
                4.0 * cp * v[axis] / s2 + 4.0 * v[axis] * cpp * q / s2
                    + 2.0 * d * v[axis] * cp / s2
            }
            VelocityProfile::SpeedSquared { scale } => {
                let s2 = scale * scale;
                let q: f64 = v.iter().map(|c| c * c).sum::<f64>() / s2;
                let (c, cp, cpp) = Self::c_terms(q);
                2.0 * d * (c + q * cp) + 4.0 * q * (2.0 * cp + q * cpp)
            }
        }
    }
}

/// Separable test function `f(x, v) = X(x) W(v)` with spatially bounded
/// support and analytic derivative evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub spatial: SpatialProfile,
    pub velocity: VelocityProfile,
}

impl TestFunction {
    pub fn new(spatial: SpatialProfile, velocity: VelocityProfile) -> Result<Self> {
        let f = TestFunction { spatial, velocity };
        f.validate_derivatives()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.spatial.center.len()
    }

    pub fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        self.spatial.value(x) * self.velocity.value(v)
    }

    pub fn grad_x(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.spatial.grad(x, out);
        let w = self.velocity.value(v);
        for c in out.iter_mut() {
            *c *= w;
        }
    }

    pub fn grad_v(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let xv = self.spatial.value(x);
        if xv == 0.0 {
            out.fill(0.0);
            return;
        }
        self.velocity.grad(v, out);
        for c in out.iter_mut() {
            *c *= xv;
        }
    }

    pub fn laplacian_v(&self, x: &[f64], v: &[f64]) -> f64 {
        self.spatial.value(x) * self.velocity.laplacian(v)
    }

    pub fn support(&self) -> Window {
        self.spatial.support()
    }

    /// Check the analytic derivatives against central differences on a probe
    /// grid; second-order accuracy is required.
    pub fn validate_derivatives(&self) -> Result<()> {
        let d = self.dim();
        let h = 1e-5;
        let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..5)
            .map(|k| {
                let t = -0.7 + 0.35 * k as f64;
                let x: Vec<f64> = self
                    .spatial
                    .center
                    .iter()
                    .map(|c| c + t * 0.8 * self.spatial.support_radius)
                    .collect();
                let v: Vec<f64> = (0..d).map(|i| 0.4 * (k as f64 - 2.0) + 0.1 * i as f64).collect();
                (x, v)
            })
            .collect();
        let mut gx = vec![0.0; d];
        let mut gv = vec![0.0; d];
        for (x, v) in &probes {
            self.grad_x(x, v, &mut gx);
            self.grad_v(x, v, &mut gv);
            let lap = self.laplacian_v(x, v);
            let mut fd_lap = 0.0;
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (self.value(&xp, v) - self.value(&xm, v)) / (2.0 * h);
                if (fd - gx[i]).abs() > 1e-6 * (1.0 + gx[i].abs()) {
                    return Err(Error::Config(format!(
                        "spatial gradient mismatch at probe: fd={fd} analytic={}",
                        gx[i]
                    )));
                }
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[i] += h;
                vm[i] -= h;
                let fdv = (self.value(x, &vp) - self.value(x, &vm)) / (2.0 * h);
                if (fdv - gv[i]).abs() > 1e-6 * (1.0 + gv[i].abs()) {
                    return Err(Error::Config(format!(
                        "velocity gradient mismatch at probe: fd={fdv} analytic={}",
                        gv[i]
                    )));
                }
                fd_lap +=
                    (self.value(x, &vp) - 2.0 * self.value(x, v) + self.value(x, &vm)) / (h * h);
            }
            if (fd_lap - lap).abs() > 1e-4 * (1.0 + lap.abs()) {
                return Err(Error::Config(format!(
                    "velocity laplacian mismatch at probe: fd={fd_lap} analytic={lap}"
                )));
            }
        }
        Ok(())
    }
}

/// Bounded outer function of the pairing vector, with analytic partials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OuterFn {
    Constant(f64),
    /// `w . u + b`; partials are constant.
    Linear { weights: Vec<f64>, intercept: f64 },
    /// `amplitude * tanh(w . u + b)`; bounded with bounded partials.
    Tanh {
        weights: Vec<f64>,
        intercept: f64,
        amplitude: f64,
    },
}

impl OuterFn {
    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            OuterFn::Constant(c) => *c,
            OuterFn::Linear { weights, intercept } => {
                intercept + weights.iter().zip(u).map(|(w, x)| w * x).sum::<f64>()
            }
            OuterFn::Tanh {
                weights,
                intercept,
                amplitude,
            } => {
                let z = intercept + weights.iter().zip(u).map(|(w, x)| w * x).sum::<f64>();
                amplitude * z.tanh()
            }
        }
    }

    pub fn partial(&self, l: usize, u: &[f64]) -> f64 {
        match self {
            OuterFn::Constant(_) => 0.0,
            OuterFn::Linear { weights, .. } => weights[l],
            OuterFn::Tanh {
                weights,
                intercept,
                amplitude,
            } => {
                let z = intercept + weights.iter().zip(u).map(|(w, x)| w * x).sum::<f64>();
                let sech2 = 1.0 - z.tanh() * z.tanh();
                amplitude * weights[l] * sech2
            }
        }
    }

    pub fn partial2(&self, l: usize, l2: usize, u: &[f64]) -> f64 {
        match self {
            OuterFn::Constant(_) | OuterFn::Linear { .. } => 0.0,
            OuterFn::Tanh {
                weights,
                intercept,
                amplitude,
            } => {
                let z = intercept + weights.iter().zip(u).map(|(w, x)| w * x).sum::<f64>();
                let t = z.tanh();
                let sech2 = 1.0 - t * t;
                -2.0 * amplitude * weights[l] * weights[l2] * sech2 * t
            }
        }
    }
}

/// Smooth cylinder observable `g(<f_1, .>, ..., <f_K, .>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderObservable {
    pub outer: OuterFn,
    pub inner: Vec<TestFunction>,
}

impl CylinderObservable {
    pub fn pairings(&self, gamma: &MarkedConfiguration) -> Vec<f64> {
        self.inner
            .iter()
            .map(|f| crate::configspace::pairing(gamma, |x, v| f.value(x, v)))
            .collect()
    }

    pub fn value(&self, gamma: &MarkedConfiguration) -> f64 {
        self.outer.value(&self.pairings(gamma))
    }
}

/// A symmetric function of a fixed number of marked points, extended by zero
/// to configurations of any other size.
pub trait ConfigurationFn: Sync {
    fn arity(&self) -> usize;
    fn eval(&self, points: &[(&[f64], &[f64])]) -> f64;
}

impl ConfigurationFn for TestFunction {
    fn arity(&self) -> usize {
        1
    }
    fn eval(&self, points: &[(&[f64], &[f64])]) -> f64 {
        self.value(points[0].0, points[0].1)
    }
}

/// Closure adapter for m-point functions.
pub struct SymmetricFn<F> {
    pub m: usize,
    pub f: F,
}

impl<F> ConfigurationFn for SymmetricFn<F>
where
    F: Fn(&[(&[f64], &[f64])]) -> f64 + Sync,
{
    fn arity(&self) -> usize {
        self.m
    }
    fn eval(&self, points: &[(&[f64], &[f64])]) -> f64 {
        (self.f)(points)
    }
}

/// K-transform: sum of `f` over all sub-configurations of matching size.
///
/// Guarded to small arities and configuration sizes; both are structural
/// preconditions, not runtime errors.
pub fn k_transform(f: &dyn ConfigurationFn, gamma: &MarkedConfiguration) -> f64 {
    let m = f.arity();
    let n = gamma.len();
    assert!(m <= 3, "k_transform arity capped at 3");
    assert!(n <= 10_000, "k_transform configuration capped at 1e4 points");
    match m {
        0 => f.eval(&[]),
        1 => (0..n)
            .map(|i| f.eval(&[(gamma.position(i), gamma.velocity(i))]))
            .sum(),
        2 => {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += f.eval(&[
                        (gamma.position(i), gamma.velocity(i)),
                        (gamma.position(j), gamma.velocity(j)),
                    ]);
                }
            }
            acc
        }
        3 => {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        acc += f.eval(&[
                            (gamma.position(i), gamma.velocity(i)),
                            (gamma.position(j), gamma.velocity(j)),
                            (gamma.position(k), gamma.velocity(k)),
                        ]);
                    }
                }
            }
            acc
        }
        _ => unreachable!(),
    }
}

/// Per-particle velocity gradient of the K-transform of a one-point
/// function: component `i` is `grad_v f(x_i, v_i)`.
pub fn grad_v_k_transform(f: &TestFunction, gamma: &MarkedConfiguration) -> Vec<f64> {
    let d = gamma.dim();
    let mut out = vec![0.0; gamma.len() * d];
    let mut g = vec![0.0; d];
    for i in 0..gamma.len() {
        f.grad_v(gamma.position(i), gamma.velocity(i), &mut g);
        out[i * d..(i + 1) * d].copy_from_slice(&g);
    }
    out
}

/// Convenience builders for the test-function family.
pub fn bump_observable(
    dim: usize,
    center: &[f64],
    radius: f64,
    velocity: VelocityProfile,
) -> Result<TestFunction> {
    TestFunction::new(
        SpatialProfile {
            center: center.to_vec(),
            gauss_width: radius,
            support_radius: radius,
        },
        velocity,
    )
    .map(|f| {
        debug_assert_eq!(f.dim(), dim);
        f
    })
}
