//! Numerical verification that the periodized potential keeps the declared
//! regularity uniformly over a family of boxes: lower bound, tail decay,
//! stability of the periodic energy, and weighted gradient norms.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{max_norm, BoxGeometry, PointSet};
use crate::potential::energy::periodic_energy;
use crate::potential::lattice::{
    certified_shells, raw_image_force_sum, raw_image_sum, LatticeSumPolicy, SumWindow,
};
use crate::potential::PotentialSpec;
use crate::rng::{NoiseStream, Purpose};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxBoundsEntry {
    pub lambda: f64,
    /// Infimum of the periodized potential on the probe grid.
    pub inf_periodized: f64,
    /// Whether the infimum respects the declared lower bound plus the
    /// lattice correction.
    pub lower_bound_ok: bool,
    /// sup |phi_lambda(x)| |x|^{d+eps} over probe points beyond the core.
    pub tail_ratio_sup: f64,
    /// Empirical stability constant: periodic energy >= -b_hat * n.
    pub stability_b_hat: f64,
    /// Fitted coefficient of the occupation-square form (diagnostic only).
    pub stability_a_hat: f64,
    /// Weighted gradient norms over the doubled box, p = 1, 2, 3.
    pub grad_norms: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformBoundsReport {
    pub beta: f64,
    pub per_box: Vec<BoxBoundsEntry>,
    /// Supremum over boxes of each weighted gradient norm.
    pub sup_grad_norms: [f64; 3],
    pub stability_b_hat: f64,
    pub all_lower_bounds_ok: bool,
}

/// Empirical uniform-bounds report over a list of boxes.
///
/// `grid_per_axis` controls the probe and quadrature grids, `trials` the
/// number of random configurations for the stability fit.
pub fn check_uniform_bounds(
    pot: &PotentialSpec,
    boxes: &[BoxGeometry],
    policy: &LatticeSumPolicy,
    beta: f64,
    grid_per_axis: usize,
    trials: usize,
    seed: u64,
) -> Result<UniformBoundsReport> {
    let mut per_box = Vec::with_capacity(boxes.len());
    for (box_idx, geometry) in boxes.iter().enumerate() {
        let d = geometry.dim();
        let lambda = geometry.half_side();
        let shells = certified_shells(pot, geometry, policy, SumWindow::Primary)?;
        let shells_wide = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;

        // probe grid over the open primary box (even count avoids the origin)
        let n = if grid_per_axis % 2 == 0 {
            grid_per_axis
        } else {
            grid_per_axis + 1
        };
        let h = geometry.side() / n as f64;
        let tail = pot.constants.tail;
        let mut inf_val = f64::INFINITY;
        let mut tail_sup: f64 = 0.0;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        loop {
            for k in 0..d {
                x[k] = -lambda + (idx[k] as f64 + 0.5) * h;
            }
            let v = raw_image_sum(&x, pot, geometry, shells, false);
            if v < inf_val {
                inf_val = v;
            }
            if let Some(t) = tail {
                let norm = max_norm(&x);
                if norm >= pot.constants.core_radius && v.is_finite() {
                    tail_sup = tail_sup.max(v.abs() * norm.powf(d as f64 + t.eps));
                }
            }
            let mut done = true;
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < n {
                    done = false;
                    break;
                }
                *slot = 0;
            }
            if done {
                break;
            }
        }
        // uniform lower bound: declared M plus the summed image tail at the
        // smallest admissible box
        let lattice_slack = 0.05 * (1.0 + pot.constants.lower_bound_m);
        let lower_bound_ok = inf_val >= -(pot.constants.lower_bound_m + lattice_slack);

        // stability scan over random configurations
        let mut stream = NoiseStream::new(seed, box_idx as u64, Purpose::Init);
        let mut b_hat: f64 = 0.0;
        let mut samples: Vec<(f64, f64)> = Vec::new(); // (energy, occupation square sum)
        let n_max = ((geometry.volume().ceil() as usize).max(2)).min(24);
        let mut block = 0u64;
        let uniform = move |s: &mut NoiseStream, b: &mut u64| {
            s.seek(*b);
            *b += 1;
            s.uniform()
        };
        for _ in 0..trials {
            let count = 2 + (uniform(&mut stream, &mut block) * (n_max - 1) as f64) as usize;
            let mut pts = PointSet::new(d);
            for _ in 0..count {
                let p: Vec<f64> = (0..d)
                    .map(|_| lambda * (2.0 * uniform(&mut stream, &mut block) - 1.0))
                    .collect();
                pts.push(&p);
            }
            let u = periodic_energy(&pts, pot, geometry, policy)?;
            if u.is_finite() {
                b_hat = b_hat.max(-u / count as f64);
                samples.push((u, occupation_square_sum(&pts, geometry)));
            }
        }
        let a_hat = fit_occupation_coefficient(&samples, b_hat);

        // weighted gradient norms over the doubled box, reduced to the
        // primary box by periodicity
        let mut grad_norms = [0.0; 3];
        if !pot.is_zero() {
            let qn = n.max(64);
            let qh = geometry.side() / qn as f64;
            let mut acc = [0.0f64; 3];
            let mut idx = vec![0usize; d];
            let mut y = vec![0.0; d];
            let mut g = vec![0.0; d];
            loop {
                for k in 0..d {
                    y[k] = -lambda + (idx[k] as f64 + 0.5) * qh;
                }
                let energy = raw_image_sum(&y, pot, geometry, shells_wide, false);
                if energy.is_finite() {
                    raw_image_force_sum(&y, pot, geometry, shells_wide, &mut g);
                    let gn: f64 = g.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let w = (-beta * energy).exp();
                    for (p, slot) in acc.iter_mut().enumerate() {
                        *slot += gn.powi(p as i32 + 1) * w;
                    }
                }
                let mut done = true;
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < qn {
                        done = false;
                        break;
                    }
                    *slot = 0;
                }
                if done {
                    break;
                }
            }
            let cell = qh.powi(d as i32);
            let doubling = 2f64.powi(d as i32);
            for p in 0..3 {
                grad_norms[p] = (acc[p] * cell * doubling).powf(1.0 / (p as f64 + 1.0));
            }
        }

        per_box.push(BoxBoundsEntry {
            lambda,
            inf_periodized: inf_val,
            lower_bound_ok,
            tail_ratio_sup: tail_sup,
            stability_b_hat: b_hat,
            stability_a_hat: a_hat,
            grad_norms,
        });
    }

    let mut sup_grad_norms = [0.0f64; 3];
    let mut b_hat: f64 = 0.0;
    let mut all_ok = true;
    for e in &per_box {
        for p in 0..3 {
            sup_grad_norms[p] = sup_grad_norms[p].max(e.grad_norms[p]);
        }
        b_hat = b_hat.max(e.stability_b_hat);
        all_ok &= e.lower_bound_ok;
    }
    Ok(UniformBoundsReport {
        beta,
        per_box,
        sup_grad_norms,
        stability_b_hat: b_hat,
        all_lower_bounds_ok: all_ok,
    })
}

/// Occupation numbers over the unit-cube partition of the box, squared and
/// summed. Used for the diagnostic quadratic stability fit.
fn occupation_square_sum(points: &PointSet, geometry: &BoxGeometry) -> f64 {
    use std::collections::BTreeMap;
    let d = geometry.dim();
    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for p in points.iter() {
        let key: Vec<i64> = (0..d).map(|k| p[k].round() as i64).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts.values().map(|&c| (c * c) as f64).sum()
}

/// Largest `a` with `energy >= a * occupation_square - b_hat * n` across the
/// sampled configurations, clamped at zero. The particle count enters via
/// `occupation_square >= n`, so the fit uses the recorded pairs directly.
fn fit_occupation_coefficient(samples: &[(f64, f64)], b_hat: f64) -> f64 {
    let mut a = f64::INFINITY;
    for &(u, q) in samples {
        if q > 0.0 {
            // n <= q always; use q as the conservative count weight
            a = a.min((u + b_hat * q) / q);
        }
    }
    if a.is_finite() {
        a.max(0.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_reports_zero_constants() {
        let pot = PotentialSpec::ideal_gas(1);
        let boxes = [BoxGeometry::new(1, 2.0).unwrap()];
        let r = check_uniform_bounds(
            &pot,
            &boxes,
            &LatticeSumPolicy::default(),
            1.0,
            32,
            40,
            9,
        )
        .unwrap();
        let e = &r.per_box[0];
        assert_eq!(e.stability_b_hat, 0.0);
        assert_eq!(e.grad_norms, [0.0; 3]);
        assert!(e.lower_bound_ok);
    }

    #[test]
    fn repulsive_potential_has_zero_b_hat() {
        let pot = PotentialSpec::soft_core(1, 1.0, 1.0, 6.0, 1.2, 1.6).unwrap();
        let boxes = [BoxGeometry::new(1, 2.0).unwrap()];
        let r = check_uniform_bounds(
            &pot,
            &boxes,
            &LatticeSumPolicy::default(),
            1.0,
            64,
            60,
            3,
        )
        .unwrap();
        assert_eq!(r.per_box[0].stability_b_hat, 0.0);
    }

    #[test]
    fn lj_norms_bounded_over_box_sweep() {
        let pot = PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let boxes: Vec<BoxGeometry> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&l| BoxGeometry::new(1, l).unwrap())
            .collect();
        let r = check_uniform_bounds(
            &pot,
            &boxes,
            &LatticeSumPolicy::default(),
            1.0,
            128,
            50,
            11,
        )
        .unwrap();
        assert!(r.all_lower_bounds_ok);
        assert!(r.sup_grad_norms.iter().all(|x| x.is_finite() && *x > 0.0));
        // the p = 3 norm should not blow up along the sweep
        let p3: Vec<f64> = r.per_box.iter().map(|e| e.grad_norms[2]).collect();
        let spread = (p3.iter().fold(0.0f64, |m, &x| m.max(x))
            - p3.iter().fold(f64::INFINITY, |m, &x| m.min(x)))
            / p3[0];
        assert!(spread < 0.5, "p=3 norms vary too much: {p3:?}");
    }
}
