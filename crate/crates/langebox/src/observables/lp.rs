//! Integration over finite configurations: reference-measure integrals of
//! m-point functions and the expansion of K-transform moments into
//! correlation-function integrals.

use crate::configspace::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::geom::{BoxGeometry, PointSet};
use crate::observables::{k_transform, ConfigurationFn};
use crate::quad::{gaussian_expectation, refine_integral, QuadratureParams};
use crate::stats;

/// Reference intensity for the point coordinates: plain Lebesgue positions,
/// or positions with independent Gaussian velocity marks of variance
/// `1/beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpIntensity {
    Lebesgue,
    GaussianVelocity { beta: f64 },
}

const GAUSS_NODES: usize = 48;

/// Reference-measure integral of an m-point function over the box:
/// `(1/m!) * integral of f` with velocities integrated against the
/// normalized Gaussian when marked.
pub fn lp_integral(
    f: &dyn ConfigurationFn,
    intensity: LpIntensity,
    geometry: &BoxGeometry,
    quad: &QuadratureParams,
) -> Result<f64> {
    let m = f.arity();
    let d = geometry.dim();
    assert!(m <= 3, "lp_integral arity capped at 3");
    if m == 0 {
        return Ok(f.eval(&[]));
    }
    let total_dim = m * d;
    if total_dim > 6 {
        return Err(Error::Config(format!(
            "lp_integral over {total_dim} spatial dimensions exceeds the cap of 6"
        )));
    }
    let lambda = geometry.half_side();
    let integrand = |xs: &[f64]| -> f64 {
        eval_with_velocities(f, xs, m, d, intensity)
    };
    let (value, _err) = refine_integral(total_dim, -lambda, lambda, quad, &integrand)?;
    let m_fact: f64 = (1..=m).map(|k| k as f64).product();
    Ok(value / m_fact)
}

fn eval_with_velocities(
    f: &dyn ConfigurationFn,
    xs: &[f64],
    m: usize,
    d: usize,
    intensity: LpIntensity,
) -> f64 {
    match intensity {
        LpIntensity::Lebesgue => {
            let zeros = vec![0.0; d];
            let pts: Vec<(&[f64], &[f64])> = (0..m)
                .map(|i| (&xs[i * d..(i + 1) * d], zeros.as_slice()))
                .collect();
            f.eval(&pts)
        }
        LpIntensity::GaussianVelocity { beta } => {
            gaussian_expectation(m * d, beta, GAUSS_NODES, &|vs: &[f64]| {
                let pts: Vec<(&[f64], &[f64])> = (0..m)
                    .map(|i| (&xs[i * d..(i + 1) * d], &vs[i * d..(i + 1) * d]))
                    .collect();
                f.eval(&pts)
            })
        }
    }
}

/// Correlation-function kernel: density of n-tuples, evaluated at a tuple of
/// positions.
pub trait CorrelationKernel: Sync {
    /// Largest order the kernel can evaluate.
    fn max_order(&self) -> usize;
    fn eval(&self, points: &PointSet) -> f64;
}

/// Constant-intensity (Poisson) kernel: `rho^(n) = z^n`.
pub struct PoissonKernel {
    pub intensity: f64,
}

impl CorrelationKernel for PoissonKernel {
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, points: &PointSet) -> f64 {
        self.intensity.powi(points.len() as i32)
    }
}

/// Index classes of the moment expansion: tuples `(a_1, ..., a_{mK})` over
/// `{0, .., m_total-1}` whose blocks of length `m` are injective and whose
/// union exhausts all `m_total` labels.
pub fn index_classes(m: usize, k_power: usize, m_total: usize) -> Vec<Vec<usize>> {
    let len = m * k_power;
    let mut out = Vec::new();
    let mut tuple = vec![0usize; len];
    fn rec(
        tuple: &mut Vec<usize>,
        pos: usize,
        m: usize,
        len: usize,
        m_total: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if pos == len {
            let mut seen = vec![false; m_total];
            for &a in tuple.iter() {
                seen[a] = true;
            }
            if seen.iter().all(|&s| s) {
                out.push(tuple.clone());
            }
            return;
        }
        let block_start = (pos / m) * m;
        'candidates: for a in 0..m_total {
            for prev in block_start..pos {
                if tuple[prev] == a {
                    continue 'candidates;
                }
            }
            tuple[pos] = a;
            rec(tuple, pos + 1, m, len, m_total, out);
        }
    }
    rec(&mut tuple, 0, m, len, m_total, &mut out);
    out
}

/// Moment of the K-transform from correlation functions:
/// `E |Kf|^K` expanded over the index classes, each class contributing a
/// correlation-weighted product integral over the box.
pub fn moment_expansion(
    f: &dyn ConfigurationFn,
    k_power: usize,
    rho: &dyn CorrelationKernel,
    geometry: &BoxGeometry,
    intensity: LpIntensity,
    quad: &QuadratureParams,
) -> Result<f64> {
    let m = f.arity();
    let d = geometry.dim();
    assert!(m <= 3 && k_power <= 3, "moment expansion capped at m, K <= 3");
    let lambda = geometry.half_side();
    let mut total = 0.0;
    for m_total in m..=(m * k_power) {
        if m_total > rho.max_order() {
            return Err(Error::Config(format!(
                "correlation kernel cannot evaluate order {m_total}"
            )));
        }
        if m_total * d > 6 {
            return Err(Error::Config(
                "moment expansion exceeds the 6-dimensional integration cap".into(),
            ));
        }
        let classes = index_classes(m, k_power, m_total);
        if classes.is_empty() {
            continue;
        }
        let integrand = |xs: &[f64]| -> f64 {
            let mut pts = PointSet::new(d);
            for i in 0..m_total {
                pts.push(&xs[i * d..(i + 1) * d]);
            }
            let density = rho.eval(&pts);
            if density == 0.0 {
                return 0.0;
            }
            let class_sum = |vs: &[f64]| -> f64 {
                let mut acc = 0.0;
                for alpha in &classes {
                    let mut prod = 1.0;
                    for block in 0..k_power {
                        let idx = &alpha[block * m..(block + 1) * m];
                        let pts_ref: Vec<(&[f64], &[f64])> = idx
                            .iter()
                            .map(|&a| (&xs[a * d..(a + 1) * d], &vs[a * d..(a + 1) * d]))
                            .collect();
                        prod *= f.eval(&pts_ref);
                        if prod == 0.0 {
                            break;
                        }
                    }
                    acc += prod;
                }
                acc
            };
            let expectation = match intensity {
                LpIntensity::Lebesgue => {
                    let zeros = vec![0.0; m_total * d];
                    class_sum(&zeros)
                }
                LpIntensity::GaussianVelocity { beta } => {
                    gaussian_expectation(m_total * d, beta, GAUSS_NODES, &class_sum)
                }
            };
            density * expectation
        };
        let (value, _) = refine_integral(m_total * d, -lambda, lambda, quad, &integrand)?;
        let m_total_fact: f64 = (1..=m_total).map(|k| k as f64).product();
        total += value / m_total_fact;
    }
    let m_fact: f64 = (1..=m).map(|k| k as f64).product();
    Ok(total / m_fact.powi(k_power as i32))
}

/// Comparison of the expansion against an empirical moment over samples.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub empirical: f64,
    pub empirical_se: f64,
    pub expansion: f64,
    pub discrepancy_se_units: f64,
}

/// Empirical `E |Kf|^K` over the samples versus the correlation expansion.
pub fn moment_check(
    f: &dyn ConfigurationFn,
    k_power: usize,
    samples: &[MarkedConfiguration],
    rho: &dyn CorrelationKernel,
    geometry: &BoxGeometry,
    intensity: LpIntensity,
    quad: &QuadratureParams,
) -> Result<MomentReport> {
    let values: Vec<f64> = samples
        .iter()
        .map(|g| k_transform(f, g).abs().powi(k_power as i32))
        .collect();
    let (empirical, empirical_se) = stats::batch_means_se(&values, 32);
    let expansion = moment_expansion(f, k_power, rho, geometry, intensity, quad)?;
    let discrepancy_se_units = if empirical_se > 0.0 {
        (empirical - expansion).abs() / empirical_se
    } else if (empirical - expansion).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MomentReport {
        empirical,
        empirical_se,
        expansion,
        discrepancy_se_units,
    })
}
