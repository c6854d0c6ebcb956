//! Evaluation of the kinetic generator on cylinder observables.
//!
//! The generator splits into a velocity-diffusion block, a friction and
//! transport block, and an interaction block coupling pairs through the pair
//! force. The free-space form uses the bare gradient; the periodic form uses
//! the lattice image force and therefore agrees with the free-space form
//! applied to the periodically continued configuration.

use crate::configspace::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::geom::BoxGeometry;
use crate::observables::CylinderObservable;
use crate::potential::lattice::{certified_shells, raw_image_force_sum, SumWindow};
use crate::potential::{LatticeSumPolicy, PotentialSpec};

/// Inner sums of the generator for one test function.
struct PerFunction {
    /// `< (kappa/beta) lap_v f - kappa v.grad_v f + v.grad_x f, gamma >`
    drift: f64,
    /// per-particle velocity gradients, flattened
    grad_v: Vec<f64>,
}

fn per_function_terms(
    obs: &CylinderObservable,
    gamma: &MarkedConfiguration,
    kappa: f64,
    beta: f64,
) -> Vec<PerFunction> {
    let d = gamma.dim();
    let n = gamma.len();
    obs.inner
        .iter()
        .map(|f| {
            let mut drift = 0.0;
            let mut grad_v = vec![0.0; n * d];
            let mut gx = vec![0.0; d];
            let mut gv = vec![0.0; d];
            for i in 0..n {
                let (x, v) = (gamma.position(i), gamma.velocity(i));
                f.grad_x(x, v, &mut gx);
                f.grad_v(x, v, &mut gv);
                let lap = f.laplacian_v(x, v);
                let v_dot_gv: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
                let v_dot_gx: f64 = v.iter().zip(&gx).map(|(a, b)| a * b).sum();
                drift += (kappa / beta) * lap - kappa * v_dot_gv + v_dot_gx;
                grad_v[i * d..(i + 1) * d].copy_from_slice(&gv);
            }
            PerFunction { drift, grad_v }
        })
        .collect()
}

fn assemble<G>(
    obs: &CylinderObservable,
    gamma: &MarkedConfiguration,
    kappa: f64,
    beta: f64,
    mut pair_force: G,
) -> f64
where
    G: FnMut(&[f64], &mut [f64]),
{
    let d = gamma.dim();
    let n = gamma.len();
    let u = obs.pairings(gamma);
    let terms = per_function_terms(obs, gamma, kappa, beta);
    let k_fns = obs.inner.len();

    // second-order block
    let mut total = 0.0;
    for l in 0..k_fns {
        for l2 in 0..k_fns {
            let p2 = obs.outer.partial2(l, l2, &u);
            if p2 == 0.0 {
                continue;
            }
            let mut cross = 0.0;
            for i in 0..n {
                let a = &terms[l].grad_v[i * d..(i + 1) * d];
                let b = &terms[l2].grad_v[i * d..(i + 1) * d];
                cross += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
            total += (kappa / beta) * p2 * cross;
        }
    }

    // first-order block: transport plus interaction
    let partials: Vec<f64> = (0..k_fns).map(|l| obs.outer.partial(l, &u)).collect();
    let mut interaction = vec![0.0; k_fns];
    if !partials.iter().all(|p| *p == 0.0) {
        let mut delta = vec![0.0; d];
        let mut g = vec![0.0; d];
        for i in 0..n {
            for j in (i + 1)..n {
                // skip pairs invisible to every test function
                let seen = (0..k_fns).any(|l| {
                    let gi = &terms[l].grad_v[i * d..(i + 1) * d];
                    let gj = &terms[l].grad_v[j * d..(j + 1) * d];
                    gi.iter().any(|c| *c != 0.0) || gj.iter().any(|c| *c != 0.0)
                });
                if !seen {
                    continue;
                }
                for k in 0..d {
                    delta[k] = gamma.position(i)[k] - gamma.position(j)[k];
                }
                pair_force(&delta, &mut g);
                for (l, inter) in interaction.iter_mut().enumerate() {
                    let gi = &terms[l].grad_v[i * d..(i + 1) * d];
                    let gj = &terms[l].grad_v[j * d..(j + 1) * d];
                    let dot: f64 = g
                        .iter()
                        .enumerate()
                        .map(|(k, gc)| gc * (gi[k] - gj[k]))
                        .sum();
                    *inter += dot;
                }
            }
        }
    }
    for l in 0..k_fns {
        total += partials[l] * (terms[l].drift - interaction[l]);
    }
    total
}

/// Generator action on a cylinder observable for a finite configuration in
/// free space, with the bare pair gradient.
pub fn apply_generator(
    obs: &CylinderObservable,
    gamma: &MarkedConfiguration,
    pot: &PotentialSpec,
    kappa: f64,
    beta: f64,
) -> f64 {
    assemble(obs, gamma, kappa, beta, |delta, g| pot.grad_phi(delta, g))
}

/// Generator action with periodic boundary: pair forces are summed over the
/// lattice images, matching the free-space generator applied to the periodic
/// continuation. Requires every test-function support inside the open box.
pub fn apply_generator_periodic(
    obs: &CylinderObservable,
    gamma: &MarkedConfiguration,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
    kappa: f64,
    beta: f64,
) -> Result<f64> {
    let lambda = geometry.half_side();
    for f in &obs.inner {
        let w = f.support();
        for k in 0..w.dim() {
            if w.lo[k] < -lambda || w.hi[k] > lambda {
                return Err(Error::SupportTooLarge {
                    lo: w.lo[k],
                    hi: w.hi[k],
                    lambda,
                });
            }
        }
    }
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    Ok(assemble(obs, gamma, kappa, beta, |delta, g| {
        raw_image_force_sum(delta, pot, geometry, shells, g)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::observables::{bump_observable, OuterFn, VelocityProfile};
    use crate::rng::{NoiseStream, Purpose};

    fn random_config(dim: usize, n: usize, half: f64, seed: u64) -> MarkedConfiguration {
        let mut s = NoiseStream::new(seed, 0, Purpose::Init);
        let mut g = MarkedConfiguration::empty(dim);
        for i in 0..n {
            s.seek(i as u64);
            let x: Vec<f64> = (0..dim).map(|_| half * (2.0 * s.uniform() - 1.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| 1.5 * (2.0 * s.uniform() - 1.0)).collect();
            g.push(&x, &v);
        }
        g
    }

    fn observable(dim: usize) -> CylinderObservable {
        let f1 = bump_observable(
            dim,
            &vec![0.1; dim],
            0.9,
            VelocityProfile::Coord { axis: 0, scale: 2.0 },
        )
        .unwrap();
        let f2 = bump_observable(dim, &vec![-0.3; dim], 0.7, VelocityProfile::SpeedSquared {
            scale: 2.0,
        })
        .unwrap();
        CylinderObservable {
            outer: OuterFn::Tanh {
                weights: vec![0.8, -0.5],
                intercept: 0.1,
                amplitude: 1.5,
            },
            inner: vec![f1, f2],
        }
    }

    #[test]
    fn constant_observable_is_annihilated() {
        let pot = PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let g = random_config(1, 4, 1.8, 3);
        let obs = CylinderObservable {
            outer: OuterFn::Constant(4.2),
            inner: vec![bump_observable(1, &[0.0], 1.0, VelocityProfile::One).unwrap()],
        };
        assert_eq!(apply_generator(&obs, &g, &pot, 1.0, 1.0), 0.0);
    }

    #[test]
    fn free_gas_reduces_to_transport_terms() {
        // with phi == 0 and a linear outer function the generator is the
        // plain pairing of the transport expression
        let pot = PotentialSpec::ideal_gas(1);
        let g = random_config(1, 5, 0.9, 7);
        let f = bump_observable(1, &[0.0], 1.0, VelocityProfile::Coord { axis: 0, scale: 2.0 })
            .unwrap();
        let obs = CylinderObservable {
            outer: OuterFn::Linear {
                weights: vec![1.0],
                intercept: 0.0,
            },
            inner: vec![f.clone()],
        };
        let (kappa, beta) = (0.8, 1.7);
        let lf = apply_generator(&obs, &g, &pot, kappa, beta);
        let mut expect = 0.0;
        let mut gx = [0.0];
        let mut gv = [0.0];
        for i in 0..g.len() {
            let (x, v) = (g.position(i), g.velocity(i));
            f.grad_x(x, v, &mut gx);
            f.grad_v(x, v, &mut gv);
            expect += (kappa / beta) * f.laplacian_v(x, v) - kappa * v[0] * gv[0] + v[0] * gx[0];
        }
        assert!((lf - expect).abs() < 1e-13);
    }

    #[test]
    fn matches_naive_three_sum_assembly() {
        // independent second implementation: literal three-part sum
        let pot = PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let g = random_config(1, 4, 1.5, 11);
        let obs = observable(1);
        let (kappa, beta) = (1.3, 0.9);
        let lf = apply_generator(&obs, &g, &pot, kappa, beta);

        let u = obs.pairings(&g);
        let kf = obs.inner.len();
        let n = g.len();
        let mut oracle = 0.0;
        for l in 0..kf {
            for l2 in 0..kf {
                let mut s = 0.0;
                for i in 0..n {
                    let mut a = [0.0];
                    let mut b = [0.0];
                    obs.inner[l].grad_v(g.position(i), g.velocity(i), &mut a);
                    obs.inner[l2].grad_v(g.position(i), g.velocity(i), &mut b);
                    s += a[0] * b[0];
                }
                oracle += (kappa / beta) * obs.outer.partial2(l, l2, &u) * s;
            }
        }
        for l in 0..kf {
            let mut transport = 0.0;
            for i in 0..n {
                let (x, v) = (g.position(i), g.velocity(i));
                let mut gx = [0.0];
                let mut gv = [0.0];
                obs.inner[l].grad_x(x, v, &mut gx);
                obs.inner[l].grad_v(x, v, &mut gv);
                transport += (kappa / beta) * obs.inner[l].laplacian_v(x, v)
                    - kappa * v[0] * gv[0]
                    + v[0] * gx[0];
            }
            let mut pair = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut grad = [0.0];
                    pot.grad_phi(&[g.position(i)[0] - g.position(j)[0]], &mut grad);
                    let mut gi = [0.0];
                    let mut gj = [0.0];
                    obs.inner[l].grad_v(g.position(i), g.velocity(i), &mut gi);
                    obs.inner[l].grad_v(g.position(j), g.velocity(j), &mut gj);
                    pair += grad[0] * (gi[0] - gj[0]);
                }
            }
            oracle += obs.outer.partial(l, &u) * (transport - pair);
        }
        assert!((lf - oracle).abs() < 1e-12, "{lf} vs {oracle}");
    }

    #[test]
    fn periodic_form_matches_wide_image_oracle() {
        let pot = PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let geometry = BoxGeometry::new(1, 1.5).unwrap();
        let policy = LatticeSumPolicy::default();
        let g = random_config(1, 4, 1.5, 23);
        let f = bump_observable(1, &[0.0], 1.0, VelocityProfile::Coord { axis: 0, scale: 2.0 })
            .unwrap();
        let obs = CylinderObservable {
            outer: OuterFn::Tanh {
                weights: vec![0.9],
                intercept: 0.0,
                amplitude: 1.0,
            },
            inner: vec![f],
        };
        let (kappa, beta) = (1.0, 1.0);
        let lf = apply_generator_periodic(&obs, &g, &pot, &geometry, &policy, kappa, beta).unwrap();

        // brute-force image force over a wide cube
        let oracle = assemble(&obs, &g, kappa, beta, |delta, out| {
            out.fill(0.0);
            let mut grad = [0.0];
            for r in -1000i64..=1000 {
                let image = [delta[0] + geometry.side() * r as f64];
                pot.grad_phi(&image, &mut grad);
                out[0] += grad[0];
            }
        });
        assert!((lf - oracle).abs() < 1e-10, "{lf} vs {oracle}");
    }

    #[test]
    fn periodic_equals_free_when_images_cannot_reach() {
        // interaction range 1.8 < box side 8, supports well inside
        let pot = PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let geometry = BoxGeometry::new(1, 4.0).unwrap();
        let policy = LatticeSumPolicy::default();
        let g = random_config(1, 4, 1.0, 31);
        let obs = observable(1);
        let lf_free = apply_generator(&obs, &g, &pot, 1.0, 1.0);
        let lf_per =
            apply_generator_periodic(&obs, &g, &pot, &geometry, &policy, 1.0, 1.0).unwrap();
        assert!((lf_free - lf_per).abs() < 1e-10);
    }

    #[test]
    fn oversized_support_is_rejected() {
        let pot = PotentialSpec::ideal_gas(1);
        let geometry = BoxGeometry::new(1, 0.5).unwrap();
        let obs = observable(1);
        assert!(matches!(
            apply_generator_periodic(
                &obs,
                &random_config(1, 2, 0.4, 2),
                &pot,
                &geometry,
                &LatticeSumPolicy::default(),
                1.0,
                1.0
            ),
            Err(Error::SupportTooLarge { .. })
        ));
    }
}
