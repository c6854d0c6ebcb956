//! Metrics on marked configuration space.
//!
//! `dist_star` is the vague product metric: weighted series of test-function
//! pairings on the marked configuration and on its position projection. It
//! generates the right topology but is not complete; `dist_full` adds a
//! repulsion-weighted pair series (controls coalescing positions) and a mark
//! series (controls velocities escaping to infinity). Series are truncated
//! at `k_max` terms with geometric tail `2^{-k_max}`, so on finite
//! configurations both are certified pseudo-metrics.

use serde::{Deserialize, Serialize};

use crate::configspace::families::{
    family_bump, mark_weight, mark_weight_inverse, plateau_cutoff, spatial_weight, Bump,
};
use crate::configspace::MarkedConfiguration;
use crate::geom::{max_norm, PointSet, Window};
use crate::potential::minorant::RepulsionMinorant;

/// A bounded positive weight sequence, constant or explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightSeq {
    Const(f64),
    List(Vec<f64>),
}

impl WeightSeq {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            WeightSeq::Const(c) => *c,
            WeightSeq::List(v) => {
                if v.is_empty() {
                    1.0
                } else {
                    v[k.min(v.len() - 1)]
                }
            }
        }
    }
}

/// Parameters of the configuration metrics. The chosen weights are recorded
/// in every experiment manifest, since the completed metric is only fixed up
/// to these choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricParams {
    pub dim: usize,
    /// Series truncation; documented tail `2^{-k_max}`.
    pub k_max: usize,
    /// Reach of the spatial bump enumeration.
    pub spatial_extent: f64,
    /// Reach of the velocity bump enumeration.
    pub velocity_extent: f64,
    /// Bump radii, cycled through the enumeration.
    pub radii_cycle: Vec<f64>,
    /// Smooth repulsion minorant entering the pair functional.
    pub minorant: RepulsionMinorant,
    /// Scale multiplying the minorant inside the exponential (e.g. beta/6).
    pub phi_scale: f64,
    pub r_weights: WeightSeq,
    pub q_weights: WeightSeq,
}

impl MetricParams {
    pub fn new(dim: usize, minorant: RepulsionMinorant, phi_scale: f64) -> Self {
        MetricParams {
            dim,
            k_max: 32,
            spatial_extent: 8.0,
            velocity_extent: 6.0,
            radii_cycle: vec![4.0, 2.0, 1.0, 0.5],
            minorant,
            phi_scale,
            r_weights: WeightSeq::Const(1.0),
            q_weights: WeightSeq::Const(1.0),
        }
    }

    fn spatial_member(&self, k: usize) -> Bump {
        family_bump(k, self.dim, self.spatial_extent, &self.radii_cycle)
    }

    fn velocity_member(&self, k: usize) -> Bump {
        // offset the enumeration so position and velocity factors decouple
        family_bump(k + 7, self.dim, self.velocity_extent, &self.radii_cycle)
    }

    /// Scaled repulsion factor `exp(phi_scale * minorant(t))`.
    pub fn repulsion_factor(&self, t: f64) -> f64 {
        (self.phi_scale * self.minorant.value(t)).exp()
    }
}

/// Sum of a spatially supported function over the points of a marked
/// configuration.
pub fn pairing<F>(gamma: &MarkedConfiguration, f: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    gamma.points().map(|(x, v)| f(x, v)).sum()
}

/// Same, restricted to points inside a spatial window first.
pub fn pairing_windowed<F>(gamma: &MarkedConfiguration, window: &Window, f: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    gamma
        .points()
        .filter(|(x, _)| window.contains(x))
        .map(|(x, v)| f(x, v))
        .sum()
}

fn subseries(t: f64) -> f64 {
    t / (1.0 + t)
}

/// Vague metric on marked configurations: test functions on position and
/// velocity jointly.
fn marked_vague(a: &MarkedConfiguration, b: &MarkedConfiguration, params: &MetricParams) -> f64 {
    let mut acc = 0.0;
    for k in 1..=params.k_max {
        let bx = params.spatial_member(k - 1);
        let bv = params.velocity_member(k - 1);
        let f = |x: &[f64], v: &[f64]| bx.value(x) * bv.value(v);
        let diff = (pairing(a, f) - pairing(b, f)).abs();
        acc += 2f64.powi(-(k as i32)) * subseries(diff);
    }
    acc
}

/// Vague metric on the position projections.
fn projected_vague(ax: &PointSet, bx: &PointSet, params: &MetricParams) -> f64 {
    let mut acc = 0.0;
    for k in 1..=params.k_max {
        let g = params.spatial_member(k - 1);
        let pa: f64 = ax.iter().map(|x| g.value(x)).sum();
        let pb: f64 = bx.iter().map(|x| g.value(x)).sum();
        acc += 2f64.powi(-(k as i32)) * subseries((pa - pb).abs());
    }
    acc
}

/// Vague product metric: marked part plus the projection part. Symmetric and
/// nonnegative; a pseudo-metric under series truncation.
pub fn dist_star(a: &MarkedConfiguration, b: &MarkedConfiguration, params: &MetricParams) -> f64 {
    marked_vague(a, b, params) + projected_vague(a.positions(), b.positions(), params)
}

/// Repulsion-weighted pair functional over an unmarked configuration:
/// `sum_{pairs} exp(Phi(|x-y|)) f(x) f(y)` with the max-norm distance.
pub fn pair_functional<F>(gamma_x: &PointSet, params: &MetricParams, weight: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = gamma_x.len();
    let d = gamma_x.dim();
    let mut delta = vec![0.0; d];
    let mut acc = 0.0;
    for i in 0..n {
        let wi = weight(gamma_x.point(i));
        if wi == 0.0 {
            continue;
        }
        for j in (i + 1)..n {
            let wj = weight(gamma_x.point(j));
            if wj == 0.0 {
                continue;
            }
            for k in 0..d {
                delta[k] = gamma_x.point(i)[k] - gamma_x.point(j)[k];
            }
            acc += params.repulsion_factor(max_norm(&delta)) * wi * wj;
        }
    }
    acc
}

/// Compactness functional: the pair functional with the plain weight plus
/// the mark series. Finite sublevel sets control both the local particle
/// count and the largest velocity.
pub fn compactness_functional(gamma: &MarkedConfiguration, params: &MetricParams) -> f64 {
    let d = params.dim;
    let pair = pair_functional(gamma.positions(), params, |x| spatial_weight(d, x));
    let marks: f64 = gamma
        .points()
        .map(|(x, v)| mark_weight(v) * spatial_weight(d, x))
        .sum();
    pair + marks
}

/// Completed metric: the vague product metric plus the pair-functional
/// series on projections and the mark series. Dominates `dist_star` term by
/// term.
pub fn dist_full(a: &MarkedConfiguration, b: &MarkedConfiguration, params: &MetricParams) -> f64 {
    let d = params.dim;
    let mut acc = dist_star(a, b, params);
    for k in 1..=params.k_max {
        let sk = |g: &MarkedConfiguration| {
            pair_functional(g.positions(), params, |x| {
                spatial_weight(d, x) * plateau_cutoff(k, x)
            })
        };
        let diff = (sk(a) - sk(b)).abs();
        acc += params.r_weights.value(k - 1) * 2f64.powi(-(k as i32)) * subseries(diff);

        let chi = |g: &MarkedConfiguration| {
            pairing(g, |x, v| {
                mark_weight(v) * spatial_weight(d, x) * plateau_cutoff(k, x)
            })
        };
        let mdiff = (chi(a) - chi(b)).abs();
        acc += params.q_weights.value(k - 1) * 2f64.powi(-(k as i32)) * subseries(mdiff);
    }
    acc
}

/// Largest particle count compatible with a compactness level `cap` inside a
/// spatial window.
pub fn count_bound(cap: f64, dim: usize, window: &Window) -> usize {
    let h_min = window_weight_min(dim, window);
    // pair term >= C(n,2) h_min^2 since the repulsion factor is >= 1
    let c = cap / (h_min * h_min);
    (0.5 * (1.0 + (1.0 + 8.0 * c).sqrt())).floor() as usize
}

/// Largest speed compatible with a compactness level `cap` inside a window.
pub fn speed_bound(cap: f64, dim: usize, window: &Window) -> f64 {
    let h_min = window_weight_min(dim, window);
    mark_weight_inverse(cap / h_min)
}

fn window_weight_min(dim: usize, window: &Window) -> f64 {
    // h is radially decreasing, so the minimum sits at the farthest corner
    let far: Vec<f64> = window
        .lo
        .iter()
        .zip(&window.hi)
        .map(|(&l, &h)| l.abs().max(h.abs()))
        .collect();
    spatial_weight(dim, &far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::minorant::{build_repulsion_minorant, MinorantOptions};
    use crate::rng::{NoiseStream, Purpose};

    fn params(dim: usize) -> MetricParams {
        let m =
            build_repulsion_minorant(|t| t.powf(-2.0 * dim as f64), dim, &MinorantOptions::default())
                .unwrap();
        MetricParams::new(dim, m, 1.0 / 6.0)
    }

    fn random_config(dim: usize, n: usize, seed: u64) -> MarkedConfiguration {
        let mut s = NoiseStream::new(seed, 0, Purpose::Init);
        let mut g = MarkedConfiguration::empty(dim);
        for i in 0..n {
            s.seek(i as u64);
            let x: Vec<f64> = (0..dim).map(|_| 4.0 * (2.0 * s.uniform() - 1.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| 2.0 * (2.0 * s.uniform() - 1.0)).collect();
            g.push(&x, &v);
        }
        g
    }

    #[test]
    fn zero_on_equal_and_symmetric() {
        let p = params(1);
        let a = random_config(1, 5, 1);
        let b = random_config(1, 4, 2);
        assert_eq!(dist_star(&a, &a, &p), 0.0);
        assert_eq!(dist_full(&a, &a, &p), 0.0);
        assert_eq!(dist_star(&a, &b, &p), dist_star(&b, &a, &p));
        assert_eq!(dist_full(&a, &b, &p), dist_full(&b, &a, &p));
        assert!(dist_star(&a, &b, &p) > 0.0);
    }

    #[test]
    fn full_metric_dominates_star() {
        let p = params(1);
        for seed in 0..6u64 {
            let a = random_config(1, 4, 10 + seed);
            let b = random_config(1, 4, 20 + seed);
            assert!(dist_full(&a, &b, &p) >= dist_star(&a, &b, &p));
        }
    }

    #[test]
    fn projection_is_metric_contractive() {
        // the projected part of dist_star is itself a pseudo-metric on
        // projections and is dominated by the whole
        let p = params(1);
        let a = random_config(1, 4, 31);
        let b = random_config(1, 4, 32);
        let proj = super::projected_vague(a.positions(), b.positions(), &p);
        assert!(proj <= dist_star(&a, &b, &p) + 1e-15);
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let p = params(1);
        for seed in 0..40u64 {
            let a = random_config(1, 3 + (seed % 3) as usize, 100 + seed);
            let b = random_config(1, 3 + (seed % 2) as usize, 200 + seed);
            let c = random_config(1, 4, 300 + seed);
            let eps = 1e-12;
            assert!(dist_star(&a, &c, &p) <= dist_star(&a, &b, &p) + dist_star(&b, &c, &p) + eps);
            assert!(dist_full(&a, &c, &p) <= dist_full(&a, &b, &p) + dist_full(&b, &c, &p) + eps);
        }
    }

    #[test]
    fn shrinking_perturbation_contracts_to_zero() {
        let p = params(1);
        let base = random_config(1, 4, 55);
        let mut prev = f64::INFINITY;
        for j in 0..14 {
            let delta = 0.25 * 0.5f64.powi(j);
            let mut pert = base.clone();
            pert.positions_mut().point_mut(0)[0] += delta;
            let d = dist_star(&base, &pert, &p);
            assert!(d <= prev + 1e-12, "not monotone at j={j}: {d} > {prev}");
            prev = d;
        }
        assert!(prev < 1e-3, "did not contract: {prev}");
    }

    #[test]
    fn compactness_functional_basics() {
        let p = params(1);
        let empty = MarkedConfiguration::empty(1);
        assert_eq!(compactness_functional(&empty, &p), 0.0);

        let mut single = MarkedConfiguration::empty(1);
        single.push(&[0.5], &[1.5]);
        let expect = mark_weight(&[1.5]) * spatial_weight(1, &[0.5]);
        assert!((compactness_functional(&single, &p) - expect).abs() < 1e-15);

        // increasing any speed increases the functional
        let mut faster = single.clone();
        faster.velocities_mut().point_mut(0)[0] = 2.5;
        assert!(compactness_functional(&faster, &p) > compactness_functional(&single, &p));
    }

    #[test]
    fn sublevel_bounds_hold_on_window() {
        let p = params(1);
        let window = Window::centered(1, 3.0);
        for seed in 0..10u64 {
            let g = random_config(1, 6, 77 + seed);
            if !g.points().all(|(x, _)| window.contains(x)) {
                continue;
            }
            let cap = compactness_functional(&g, &p);
            assert!(g.len() <= count_bound(cap, 1, &window), "count bound failed");
            let vmax = g
                .points()
                .map(|(_, v)| crate::geom::eucl_norm(v))
                .fold(0.0f64, f64::max);
            assert!(
                vmax <= speed_bound(cap, 1, &window) + 1e-9,
                "speed bound failed: {vmax}"
            );
        }
    }

    #[test]
    fn velocity_difference_is_seen_by_the_mark_series()
    {
        let p = params(1);
        let mut a = MarkedConfiguration::empty(1);
        a.push(&[0.2], &[0.5]);
        let mut b = MarkedConfiguration::empty(1);
        b.push(&[0.2], &[3.0]);
        // position projections agree; only mark/velocity terms separate them
        let d_full = dist_full(&a, &b, &p);
        let chi1 = mark_weight(&[0.5]) * spatial_weight(1, &[0.2]);
        let chi2 = mark_weight(&[3.0]) * spatial_weight(1, &[0.2]);
        let first_term = 0.5 * subseries((chi1 - chi2).abs());
        assert!(d_full >= first_term, "{d_full} < {first_term}");
    }
}
