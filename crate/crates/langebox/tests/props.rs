//! Property tests for the geometric and algebraic invariants: wrapping,
//! minimum image, pair symmetry of lattice sums, energy additivity, force
//! consistency, metric axioms and K-transform linearity.

use proptest::prelude::*;

use langebox::configspace::{dist_full, dist_star, MarkedConfiguration, MetricParams};
use langebox::geom::{BoxGeometry, PointSet};
use langebox::observables::{k_transform, SymmetricFn};
use langebox::potential::energy::{config_energy, interaction_energy, periodic_energy};
use langebox::potential::forces::{periodic_forces, ForceMethod};
use langebox::potential::lattice::{boxed_image_sum, wide_image_sum};
use langebox::potential::minorant::{build_repulsion_minorant, MinorantOptions};
use langebox::potential::{LatticeSumPolicy, PotentialSpec};

fn lj(d: usize) -> PotentialSpec {
    PotentialSpec::smoothed_lj(d, 0.25, 1.0, 1.3, 1.8).unwrap()
}

fn metric_params(dim: usize) -> MetricParams {
    let m = build_repulsion_minorant(
        |t| t.powf(-2.0 * dim as f64),
        dim,
        &MinorantOptions::default(),
    )
    .unwrap();
    MetricParams::new(dim, m, 1.0 / 6.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wrap_is_idempotent_and_in_range(x in -50.0f64..50.0, lambda in 0.5f64..10.0) {
        let b = BoxGeometry::new(1, lambda).unwrap();
        let w = b.wrap_coord(x);
        prop_assert!(w > -lambda && w <= lambda);
        prop_assert_eq!(b.wrap_coord(w), w);
    }

    #[test]
    fn min_image_is_the_unique_boxed_representative(
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        r in -4i64..4,
    ) {
        let b = BoxGeometry::new(1, 1.0).unwrap();
        let delta = b.min_image_delta(&[x], &[y]);
        prop_assert!(delta[0] > -1.0 && delta[0] <= 1.0);
        // shifting by any nonzero lattice vector leaves the box
        if r != 0 {
            let shifted = delta[0] + 2.0 * r as f64;
            prop_assert!(!(shifted > -1.0 && shifted <= 1.0));
        }
    }

    #[test]
    fn lattice_sums_are_even(y in -1.99f64..1.99) {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        let w1 = wide_image_sum(&[y], &pot, &b, &policy).unwrap();
        let w2 = wide_image_sum(&[-y], &pot, &b, &policy).unwrap();
        if w1.is_finite() {
            prop_assert!((w1 - w2).abs() <= 1e-12 * (1.0 + w1.abs()));
        }
        // primary and doubled windows agree inside the primary box
        if y.abs() < 1.0 {
            let p = boxed_image_sum(&[y], &pot, &b, &policy).unwrap();
            prop_assert!((p - w1).abs() <= 1e-12 * (1.0 + w1.abs()));
        }
    }

    #[test]
    fn interaction_energy_is_union_difference(
        xs in prop::collection::vec(-1.6f64..1.6, 2..5),
        ys in prop::collection::vec(-1.6f64..1.6, 2..5),
    ) {
        let pot = lj(1);
        let z1 = PointSet::from_flat(1, xs.clone()).unwrap();
        let z2 = PointSet::from_flat(1, ys.iter().map(|y| y + 7.0).collect()).unwrap();
        let w = interaction_energy(&z1, &z2, &pot).unwrap();
        let mut joint = PointSet::new(1);
        for p in z1.iter().chain(z2.iter()) {
            joint.push(p);
        }
        let lhs = config_energy(&joint, &pot);
        let rhs = config_energy(&z1, &pot) + config_energy(&z2, &pot) + w;
        if lhs.is_finite() && rhs.is_finite() {
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn forces_are_balanced_and_lattice_equivariant(
        xs in prop::collection::vec(-1.99f64..1.99, 3..7),
        shift in -3i64..3,
    ) {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 2.0).unwrap();
        let policy = LatticeSumPolicy::default();
        let z = PointSet::from_flat(1, xs.clone()).unwrap();
        if z.has_coincidence().is_some() {
            return Ok(());
        }
        let f = periodic_forces(&z, &pot, &b, &policy, ForceMethod::Naive).unwrap();
        let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let total: f64 = f.iter().sum();
        prop_assert!(total.abs() <= 1e-12 * scale);
        // shifting all particles by a lattice vector leaves forces unchanged
        let shifted = PointSet::from_flat(
            1,
            xs.iter().map(|x| x + 4.0 * shift as f64).collect(),
        )
        .unwrap();
        let f2 = periodic_forces(&shifted, &pot, &b, &policy, ForceMethod::Naive).unwrap();
        for (a, c) in f.iter().zip(&f2) {
            prop_assert!((a - c).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn periodic_energy_is_translation_invariant(
        xs in prop::collection::vec(-1.99f64..1.99, 2..6),
        a in -1.0f64..1.0,
    ) {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 2.0).unwrap();
        let policy = LatticeSumPolicy::default();
        let z = PointSet::from_flat(1, xs.clone()).unwrap();
        let u1 = periodic_energy(&z, &pot, &b, &policy).unwrap();
        let shifted =
            PointSet::from_flat(1, xs.iter().map(|x| b.wrap_coord(x + a)).collect()).unwrap();
        let u2 = periodic_energy(&shifted, &pot, &b, &policy).unwrap();
        if u1.is_finite() {
            prop_assert!((u1 - u2).abs() <= 1e-9 * (1.0 + u1.abs()));
        }
    }

    #[test]
    fn metric_axioms_on_random_triples(
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
        seed_c in 0u64..1000,
    ) {
        let params = metric_params(1);
        let make = |seed: u64| {
            let mut s = langebox::rng::NoiseStream::new(seed, 0, langebox::rng::Purpose::Init);
            let mut g = MarkedConfiguration::empty(1);
            for i in 0..4u64 {
                s.seek(i);
                g.push(&[4.0 * (2.0 * s.uniform() - 1.0)], &[2.0 * s.normal()]);
            }
            g
        };
        let (a, b, c) = (make(seed_a), make(seed_b), make(seed_c));
        let eps = 1e-12;
        prop_assert!(dist_star(&a, &b, &params) >= 0.0);
        prop_assert_eq!(dist_star(&a, &b, &params), dist_star(&b, &a, &params));
        prop_assert!(
            dist_star(&a, &c, &params)
                <= dist_star(&a, &b, &params) + dist_star(&b, &c, &params) + eps
        );
        prop_assert!(
            dist_full(&a, &c, &params)
                <= dist_full(&a, &b, &params) + dist_full(&b, &c, &params) + eps
        );
        prop_assert!(dist_full(&a, &b, &params) + eps >= dist_star(&a, &b, &params));
    }

    #[test]
    fn k_transform_is_linear_in_the_function(
        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..6),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut g = MarkedConfiguration::empty(1);
        for (i, (x, v)) in pts.iter().enumerate() {
            g.push(&[x + i as f64 * 17.0], &[*v]);
        }
        let f1 = SymmetricFn { m: 2, f: |p: &[(&[f64], &[f64])]| (p[0].0[0] - p[1].0[0]).cos() };
        let f2 = SymmetricFn { m: 2, f: |p: &[(&[f64], &[f64])]| p[0].1[0] * p[1].1[0] };
        let combo = SymmetricFn {
            m: 2,
            f: |p: &[(&[f64], &[f64])]| {
                a * (p[0].0[0] - p[1].0[0]).cos() + b * (p[0].1[0] * p[1].1[0])
            },
        };
        let lhs = k_transform(&combo, &g);
        let rhs = a * k_transform(&f1, &g) + b * k_transform(&f2, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }
}

#[test]
fn periodized_potential_converges_to_bare_potential() {
    // once the box dwarfs the interaction range, the lattice sum equals the
    // bare potential within the declared tail bound
    let pot = lj(1);
    let tail = pot.constants.tail.unwrap();
    for lambda in [2.0, 4.0, 8.0] {
        let b = BoxGeometry::new(1, lambda).unwrap();
        let policy = LatticeSumPolicy::default();
        let zeta_like: f64 = (1..200)
            .map(|r| 2.0 * (r as f64).powf(-1.0 - tail.eps))
            .sum();
        let bound = tail.g * lambda.powf(-1.0 - tail.eps) * zeta_like;
        for k in 1..40 {
            let y = [lambda * (k as f64 / 40.0) * 0.99];
            let diff = (wide_image_sum(&y, &pot, &b, &policy).unwrap() - pot.phi(&y)).abs();
            assert!(diff <= bound + 1e-12, "lambda={lambda} y={} diff={diff} bound={bound}", y[0]);
        }
    }
}
