//! Correlation-function estimation from samples, partition-ratio checks and
//! the empirical uniform-bound (Ruelle-type) verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{max_norm, BoxGeometry, PointSet};
use crate::gibbs::mcmc::{insertion_ratio_estimate, sample_canonical, McmcParams};
use crate::gibbs::oracle::QuadratureOracle;
use crate::gibbs::{CorrelationEstimate, EnsembleSpec, EstimateMethod, GibbsEnsemble};
use crate::potential::lattice::{certified_shells, raw_image_sum, SumWindow};
use crate::potential::{LatticeSumPolicy, PotentialSpec};
use crate::quad::QuadratureParams;
use crate::stats;

/// Histogram estimate of the one- or two-point correlation function.
///
/// Order one bins positions; its integral over the box is the particle
/// count by construction. Order two bins minimum-image separations of
/// ordered pairs, using translation invariance of the periodic ensemble; its
/// bin integral is `N (N - 1)`.
pub fn estimate_correlation(
    ensemble: &GibbsEnsemble,
    geometry: &BoxGeometry,
    order: usize,
    bins_per_axis: usize,
) -> Result<CorrelationEstimate> {
    if !(order == 1 || order == 2) {
        return Err(Error::Config("histogram estimates support orders 1 and 2".into()));
    }
    let d = geometry.dim();
    let lambda = geometry.half_side();
    let n_cells = bins_per_axis.pow(d as u32);
    let bin_w = geometry.side() / bins_per_axis as f64;
    let bin_volume = bin_w.powi(d as i32);
    let n_samples = ensemble.samples.len();
    let n_batches = 32.min(n_samples.max(1));
    let mut batch_counts = vec![vec![0.0f64; n_cells]; n_batches];

    let cell_of = |v: &[f64]| -> usize {
        let mut idx = 0;
        for k in 0..d {
            let mut c = ((v[k] + lambda) / bin_w) as usize;
            if c >= bins_per_axis {
                c = bins_per_axis - 1;
            }
            idx = idx * bins_per_axis + c;
        }
        idx
    };

    for (s_idx, sample) in ensemble.samples.iter().enumerate() {
        let batch = s_idx * n_batches / n_samples.max(1);
        let counts = &mut batch_counts[batch.min(n_batches - 1)];
        match order {
            1 => {
                for p in sample.positions().iter() {
                    counts[cell_of(p)] += 1.0;
                }
            }
            _ => {
                let n = sample.len();
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let delta =
                            geometry.min_image_delta(sample.position(i), sample.position(j));
                        counts[cell_of(&delta)] += 1.0;
                    }
                }
            }
        }
    }

    // normalization per sample: density for order 1; separation density for
    // order 2 carries the extra box volume from translation reduction
    let norm = match order {
        1 => 1.0 / (n_samples as f64 * bin_volume),
        _ => 1.0 / (n_samples as f64 * bin_volume * geometry.volume()),
    };
    let batch_samples = (n_samples as f64 / n_batches as f64).max(1.0);
    let batch_norm = norm * n_samples as f64 / batch_samples;

    let mut values = vec![0.0; n_cells];
    let mut errors = vec![0.0; n_cells];
    for cell in 0..n_cells {
        let batch_values: Vec<f64> = batch_counts.iter().map(|b| b[cell] * batch_norm).collect();
        values[cell] = batch_counts.iter().map(|b| b[cell]).sum::<f64>() * norm;
        errors[cell] = (stats::variance(&batch_values) / n_batches as f64).sqrt();
    }

    let mut points = Vec::with_capacity(n_cells);
    for cell in 0..n_cells {
        let mut rest = cell;
        let mut coord = vec![0.0; d];
        for k in (0..d).rev() {
            let c = rest % bins_per_axis;
            rest /= bins_per_axis;
            coord[k] = -lambda + (c as f64 + 0.5) * bin_w;
        }
        points.push(coord);
    }

    Ok(CorrelationEstimate {
        order,
        separation_reduced: order == 2,
        points,
        values,
        errors,
        method: EstimateMethod::Mcmc,
        bin_volume,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionRatioEntry {
    pub n: usize,
    pub density: f64,
    /// Measured `(2 lambda)^d Z^N / Z^{N+1}`; also the implied constant.
    pub ratio: f64,
    pub se: f64,
    pub method: EstimateMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionRatioReport {
    pub entries: Vec<PartitionRatioEntry>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Scaled partition ratios along a particle-count sweep, by quadrature where
/// the oracle reaches and by particle insertion otherwise. Passes when every
/// measured ratio is finite.
pub fn partition_ratio_check(
    base: &EnsembleSpec,
    counts: &[usize],
    mcmc: Option<(&McmcParams, usize, u64)>,
    quad: &QuadratureParams,
) -> Result<PartitionRatioReport> {
    let mut entries = Vec::new();
    let volume = base.geometry.volume();
    let d = base.geometry.dim();
    for &n in counts {
        let spec_n = EnsembleSpec::new(
            n,
            base.geometry,
            base.beta,
            base.pot.clone(),
            base.rho_max,
        )?;
        // quadrature covers N <= 2 so the (N+1)-particle partition function
        // stays inside the oracle envelope; larger counts use insertion
        let oracle_feasible = n <= 2 && (n + 1) * d <= 6;
        if oracle_feasible {
            let oracle_n = QuadratureOracle::new(spec_n.clone(), LatticeSumPolicy::default(), *quad)?;
            let spec_n1 = EnsembleSpec::new(
                n + 1,
                base.geometry,
                base.beta,
                base.pot.clone(),
                base.rho_max,
            )?;
            let oracle_n1 = QuadratureOracle::new(spec_n1, LatticeSumPolicy::default(), *quad)?;
            let ratio = volume * oracle_n.partition() / oracle_n1.partition();
            let rel = oracle_n.partition_error() / oracle_n.partition()
                + oracle_n1.partition_error() / oracle_n1.partition();
            entries.push(PartitionRatioEntry {
                n,
                density: spec_n.density(),
                ratio,
                se: ratio * rel,
                method: EstimateMethod::Quadrature,
            });
        }
        if let Some((params, insertions, seed)) = mcmc {
            let ens = sample_canonical(&spec_n, params, seed.wrapping_add(n as u64))?;
            let (ratio, se) =
                insertion_ratio_estimate(&ens, &spec_n, insertions, seed ^ 0x5eed, &params.policy)?;
            entries.push(PartitionRatioEntry {
                n,
                density: spec_n.density(),
                ratio,
                se,
                method: EstimateMethod::Mcmc,
            });
        }
    }
    let max_ratio = entries.iter().fold(0.0f64, |m, e| m.max(e.ratio));
    let pass = !entries.is_empty() && entries.iter().all(|e| e.ratio.is_finite() && e.ratio > 0.0);
    Ok(PartitionRatioReport {
        entries,
        max_ratio,
        pass,
    })
}

/// One box worth of correlation estimates entering the uniform-bound check.
pub struct RuelleGroup {
    pub geometry: BoxGeometry,
    pub beta: f64,
    pub estimates: Vec<CorrelationEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuelleLambdaEntry {
    pub lambda: f64,
    /// sup over orders of (sup k^(n))^{1/n}.
    pub xi_hat: f64,
    /// Same with the Boltzmann reweighting that tames the core.
    pub zeta_hat: f64,
    /// sup of k^(2)(s) exp(beta phi_per(s)) over core separations.
    pub near_core_sup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuelleReport {
    pub entries: Vec<RuelleLambdaEntry>,
    pub xi_rel_spread: f64,
    pub zeta_rel_spread: f64,
    pub pass: bool,
}

/// Empirical uniform-bound constants across a box sweep at fixed density:
/// finite and stable within 20% passes.
pub fn check_ruelle(
    groups: &[RuelleGroup],
    pot: &PotentialSpec,
    policy: &LatticeSumPolicy,
) -> Result<RuelleReport> {
    let mut entries = Vec::new();
    for g in groups {
        let shells = certified_shells(pot, &g.geometry, policy, SumWindow::Doubled)?;
        let mut xi: f64 = 0.0;
        let mut zeta: f64 = 0.0;
        let mut near_core: f64 = 0.0;
        for est in &g.estimates {
            if est.order == 0 {
                continue;
            }
            let inv_n = 1.0 / est.order as f64;
            xi = xi.max(est.max_value().powf(inv_n));
            let bin_width = if est.bin_volume > 0.0 {
                est.bin_volume.powf(1.0 / g.geometry.dim() as f64)
            } else {
                0.0
            };
            for ((pt, &v), &err) in est.points.iter().zip(&est.values).zip(&est.errors) {
                // reweighting amplifies sampling noise near the core; stay
                // above the estimator's noise floor
                if v <= 0.0 || v <= 3.0 * err {
                    continue;
                }
                // a histogram bin only resolves the reweighted bound where
                // the Boltzmann factor is near constant across the bin
                if bin_width > 0.0
                    && est.order == 2
                    && est.separation_reduced
                    && !boltzmann_resolvable(pt, bin_width, g.beta, pot, &g.geometry, shells)
                {
                    continue;
                }
                // energy of the evaluation tuple
                let energy = match (est.order, est.separation_reduced) {
                    (1, _) => 0.0,
                    (2, true) => raw_image_sum(pt, pot, &g.geometry, shells, false),
                    _ => tuple_energy(pt, est.order, pot, &g.geometry, shells),
                };
                if !energy.is_finite() {
                    continue;
                }
                let reweighted = v * (2.0 * g.beta / est.order as f64 * energy).exp();
                zeta = zeta.max(reweighted.powf(inv_n));
                if est.order == 2 && est.separation_reduced {
                    let sep = max_norm(pt);
                    if sep <= pot.constants.core_radius {
                        near_core = near_core.max(v * (g.beta * energy).exp());
                    }
                }
            }
        }
        entries.push(RuelleLambdaEntry {
            lambda: g.geometry.half_side(),
            xi_hat: xi,
            zeta_hat: zeta,
            near_core_sup: near_core,
        });
    }
    let spread = |vals: Vec<f64>| -> f64 {
        let hi = vals.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lo = vals.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
        if mean > 0.0 {
            (hi - lo) / mean
        } else {
            0.0
        }
    };
    let xi_rel_spread = spread(entries.iter().map(|e| e.xi_hat).collect());
    let zeta_rel_spread = spread(entries.iter().map(|e| e.zeta_hat).collect());
    let finite = entries
        .iter()
        .all(|e| e.xi_hat.is_finite() && e.zeta_hat.is_finite() && e.near_core_sup.is_finite());
    let pass = finite && xi_rel_spread < 0.20 && zeta_rel_spread < 0.20;
    Ok(RuelleReport {
        entries,
        xi_rel_spread,
        zeta_rel_spread,
        pass,
    })
}

/// Whether the pair Boltzmann factor is close to constant over a separation
/// bin, so that bin-center reweighting is meaningful.
fn boltzmann_resolvable(
    sep: &[f64],
    bin_width: f64,
    beta: f64,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    shells: u32,
) -> bool {
    let center = raw_image_sum(sep, pot, geometry, shells, false);
    if !center.is_finite() {
        return false;
    }
    let mut probe = sep.to_vec();
    for k in 0..sep.len() {
        for sign in [-1.0, 1.0] {
            probe.copy_from_slice(sep);
            probe[k] += sign * 0.5 * bin_width;
            let edge = raw_image_sum(&probe, pot, geometry, shells, false);
            if !edge.is_finite() || beta * (edge - center).abs() > 1.0 {
                return false;
            }
        }
    }
    true
}

fn tuple_energy(
    flat: &[f64],
    order: usize,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    shells: u32,
) -> f64 {
    let d = geometry.dim();
    let mut delta = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..order {
        for j in (i + 1)..order {
            for k in 0..d {
                delta[k] = flat[i * d + k] - flat[j * d + k];
            }
            total += raw_image_sum(&delta, pot, geometry, shells, false);
        }
    }
    total
}

/// Surrogate sequences for the superstability case split: occupation levels
/// `psi_j`, cube half-widths `l_j`, the first index considered, and the
/// energy threshold in units of `ln(k)` per particle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseParams {
    pub psi: Vec<f64>,
    pub half_widths: Vec<u64>,
    pub start_index: usize,
    pub ln_k: f64,
}

/// Labels of the classical three-way superstability case split, exposed as a
/// diagnostic classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuperstabilityCase {
    /// Occupation squares stay below every threshold scale.
    SparseCounts,
    /// The periodic energy alone dominates the particle count.
    EnergyDominated,
    /// A largest scale still carries an occupation excess.
    ClusterScale { q: usize },
}

/// Classify a configuration by energy threshold first, then occupation
/// counts over growing cube families. The configuration is augmented by its
/// boundary images (one representative per antipodal direction), matching
/// the decomposition used for the periodic energy.
pub fn classify_case(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    beta: f64,
    params: &CaseParams,
    policy: &LatticeSumPolicy,
) -> Result<SuperstabilityCase> {
    let n = points.len();
    if n > 0 {
        let energy = crate::potential::energy::periodic_energy(points, pot, geometry, policy)?;
        if energy.is_finite() && beta * energy > params.ln_k * n as f64 {
            return Ok(SuperstabilityCase::EnergyDominated);
        }
        if energy.is_infinite() {
            return Ok(SuperstabilityCase::EnergyDominated);
        }
    }

    // occupation numbers of the configuration plus its half-shell images
    let d = geometry.dim();
    let side = geometry.side();
    let mut augmented: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let mut rep = vec![-1i64; d];
    loop {
        let lex_positive = rep.iter().find(|&&c| c != 0).map(|&c| c > 0).unwrap_or(false);
        if lex_positive {
            for p in points.iter() {
                let image: Vec<f64> = (0..d).map(|k| p[k] + side * rep[k] as f64).collect();
                if image.iter().all(|&c| -side < c && c <= side) {
                    augmented.push(image);
                }
            }
        }
        let mut done = true;
        for slot in rep.iter_mut() {
            *slot += 1;
            if *slot <= 1 {
                done = false;
                break;
            }
            *slot = -1;
        }
        if done {
            break;
        }
    }
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for p in &augmented {
        let key: Vec<i64> = p.iter().map(|c| c.round() as i64).collect();
        *counts.entry(key).or_insert(0) += 1;
    }

    let level_sum = |half_width: u64| -> f64 {
        counts
            .iter()
            .filter(|(key, _)| key.iter().all(|&c| c.unsigned_abs() <= half_width))
            .map(|(_, &c)| (c * c) as f64)
            .sum()
    };

    let j_end = params.psi.len().min(params.half_widths.len());
    let mut sparse = true;
    let mut largest_excess = None;
    for j in params.start_index..j_end {
        let volume = (2 * params.half_widths[j] + 1).pow(d as u32) as f64;
        let s = level_sum(params.half_widths[j]);
        if s > params.psi[j] * volume {
            sparse = false;
            largest_excess = Some(j);
        }
    }
    if sparse {
        return Ok(SuperstabilityCase::SparseCounts);
    }
    Ok(SuperstabilityCase::ClusterScale {
        q: largest_excess.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::mcmc::sample_canonical;

    fn default_case_params() -> CaseParams {
        CaseParams {
            psi: vec![1.0, 2.0, 4.0, 8.0],
            half_widths: vec![1, 2, 3, 4],
            start_index: 0,
            ln_k: (4.0f64).ln(),
        }
    }

    #[test]
    fn empty_configuration_is_sparse() {
        let pot = PotentialSpec::ideal_gas(1);
        let geometry = BoxGeometry::new(1, 2.0).unwrap();
        let c = classify_case(
            &PointSet::new(1),
            &pot,
            &geometry,
            1.0,
            &default_case_params(),
            &LatticeSumPolicy::default(),
        )
        .unwrap();
        assert_eq!(c, SuperstabilityCase::SparseCounts);
    }

    #[test]
    fn spread_free_particles_are_sparse() {
        let pot = PotentialSpec::ideal_gas(1);
        let geometry = BoxGeometry::new(1, 2.0).unwrap();
        let pts = PointSet::from_points(1, &[vec![-1.5], vec![0.0], vec![1.5]]).unwrap();
        let c = classify_case(
            &pts,
            &pot,
            &geometry,
            1.0,
            &default_case_params(),
            &LatticeSumPolicy::default(),
        )
        .unwrap();
        assert_eq!(c, SuperstabilityCase::SparseCounts);
    }

    #[test]
    fn tight_repulsive_cluster_is_energy_dominated() {
        let pot = PotentialSpec::soft_core(1, 1.0, 1.0, 6.0, 1.2, 1.6).unwrap();
        let geometry = BoxGeometry::new(1, 2.0).unwrap();
        let pts =
            PointSet::from_points(1, &[vec![0.0], vec![0.05], vec![0.1], vec![0.15]]).unwrap();
        let c = classify_case(
            &pts,
            &pot,
            &geometry,
            1.0,
            &default_case_params(),
            &LatticeSumPolicy::default(),
        )
        .unwrap();
        assert_eq!(c, SuperstabilityCase::EnergyDominated);
    }

    #[test]
    fn crowded_free_gas_lands_in_cluster_case() {
        // many particles in one unit cube, no energy to stop them
        let pot = PotentialSpec::ideal_gas(1);
        let geometry = BoxGeometry::new(1, 2.0).unwrap();
        let pts = PointSet::from_points(
            1,
            &(0..9).map(|i| vec![0.01 * i as f64]).collect::<Vec<_>>(),
        )
        .unwrap();
        let c = classify_case(
            &pts,
            &pot,
            &geometry,
            1.0,
            &default_case_params(),
            &LatticeSumPolicy::default(),
        )
        .unwrap();
        assert!(matches!(c, SuperstabilityCase::ClusterScale { .. }));
    }

    #[test]
    fn order_one_histogram_integrates_to_particle_count() {
        let spec = EnsembleSpec::new(
            4,
            BoxGeometry::new(1, 2.0).unwrap(),
            1.0,
            PotentialSpec::ideal_gas(1),
            10.0,
        )
        .unwrap();
        let ens = sample_canonical(
            &spec,
            &McmcParams {
                n_samples: 200,
                burn_in_sweeps: 10,
                thin_sweeps: 1,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let est = estimate_correlation(&ens, &spec.geometry, 1, 16).unwrap();
        assert!((est.bin_integral() - 4.0).abs() < 1e-9);
        // separation-reduced: bin integral carries 1/volume from the
        // translation reduction
        let est2 = estimate_correlation(&ens, &spec.geometry, 2, 16).unwrap();
        assert!((est2.bin_integral() - 12.0 / 4.0).abs() < 1e-9);
    }
}
