//! Lattice image sums of a pair potential over `2 lambda Z^d`.
//!
//! A finite implementation truncates the image sum at a shell radius and
//! certifies the neglected tail from the declared tail decay; with the
//! built-in switched potentials the support argument makes the tail exactly
//! zero once the shells clear the cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{max_norm, BoxGeometry};
use crate::potential::PotentialSpec;

/// Truncation policy for lattice sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumPolicy {
    /// Fixed shell radius; `None` selects the smallest certified radius.
    pub shells: Option<u32>,
    /// Admissible absolute error per evaluated sum.
    pub target_abs_error: f64,
}

impl Default for LatticeSumPolicy {
    fn default() -> Self {
        LatticeSumPolicy {
            shells: None,
            target_abs_error: 1e-10,
        }
    }
}

/// Which indicator window the sum carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumWindow {
    /// Zero outside the open primary box `(-lambda, lambda)^d`.
    Primary,
    /// Zero outside the open doubled box `(-2 lambda, 2 lambda)^d`.
    Doubled,
}

/// Number of lattice vectors with max norm exactly `m`.
fn shell_count(dim: usize, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let outer = (2 * m + 1).pow(dim as u32) as f64;
    let inner = (2 * m - 1).pow(dim as u32) as f64;
    outer - inner
}

/// Guaranteed lower bound on `|y + 2 lambda r|` over the window, for
/// `|r| = m`.
fn image_distance(half_side: f64, window: SumWindow, m: u64) -> f64 {
    match window {
        SumWindow::Primary => half_side * (2 * m - 1) as f64,
        SumWindow::Doubled => 2.0 * half_side * (m - 1) as f64,
    }
}

/// Certified bound on the neglected tail beyond `shells` image shells.
pub fn tail_bound(
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    shells: u32,
    window: SumWindow,
) -> Result<f64> {
    // support argument: once every neglected image is past the cutoff the
    // tail is exactly zero
    if shells >= support_shells(pot, geometry, window) {
        return Ok(0.0);
    }
    let tail = pot.constants.tail.ok_or(Error::NonSummableTail)?;
    if tail.g == 0.0 {
        return Ok(0.0);
    }
    let d = geometry.dim();
    let lambda = geometry.half_side();
    let r_core = pot.constants.core_radius;
    let m_min = match window {
        SumWindow::Primary => 1,
        SumWindow::Doubled => 2,
    };
    let mut first = (shells as u64 + 1).max(m_min);
    // decay bound is only valid past the core radius
    while image_distance(lambda, window, first) < r_core {
        first += 1;
    }
    let explicit_until = first + 64;
    let mut acc = 0.0;
    for m in first..explicit_until {
        let dist = image_distance(lambda, window, m);
        acc += shell_count(d, m) * tail.g * dist.powf(-(d as f64) - tail.eps);
    }
    // algebraic remainder: count(m) <= 2d (3m)^{d-1}, distance >= lambda m
    let a = 2.0 * d as f64 * 3f64.powi(d as i32 - 1) * tail.g
        * lambda.powf(-(d as f64) - tail.eps);
    acc += a * (explicit_until as f64 - 1.0).powf(-tail.eps) / tail.eps;
    Ok(acc)
}

/// Shell radius past which images cannot reach the potential support.
fn support_shells(pot: &PotentialSpec, geometry: &BoxGeometry, window: SumWindow) -> u32 {
    let range = pot.finite_range();
    let lambda = geometry.half_side();
    if range <= 0.0 {
        return 0;
    }
    let mut m = match window {
        SumWindow::Primary => 1u64,
        SumWindow::Doubled => 2u64,
    };
    while image_distance(lambda, window, m) <= range {
        m += 1;
    }
    (m - 1) as u32
}

/// Resolve the shell radius for a sum: honor a fixed radius if it certifies,
/// otherwise take the smallest radius meeting the target.
pub fn certified_shells(
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
    window: SumWindow,
) -> Result<u32> {
    if let Some(k) = policy.shells {
        let t = tail_bound(pot, geometry, k, window)?;
        if t <= policy.target_abs_error {
            return Ok(k);
        }
        return Err(Error::TailAboveTarget {
            shells: k,
            tail: t,
            target: policy.target_abs_error,
        });
    }
    let sup = support_shells(pot, geometry, window);
    // the support radius certifies a zero tail; still try smaller radii in
    // case the decay alone already meets the target
    for k in 0..sup {
        if let Ok(t) = tail_bound(pot, geometry, k, window) {
            if t <= policy.target_abs_error {
                return Ok(k);
            }
        }
    }
    Ok(sup)
}

/// Raw image sum with a fixed shell radius, no indicator window applied.
pub(crate) fn raw_image_sum(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    shells: u32,
    capped: bool,
) -> f64 {
    let d = geometry.dim();
    let side = geometry.side();
    let range = pot.finite_range();
    let k = shells as i64;
    let mut total = 0.0;
    let mut image = vec![0.0; d];
    let mut r = vec![-k; d];
    loop {
        let mut reachable = true;
        for i in 0..d {
            image[i] = y[i] + side * r[i] as f64;
            // cheap reject: one coordinate past the support already kills it
            if range > 0.0 && image[i].abs() > range {
                reachable = false;
            }
        }
        if range == 0.0 {
            reachable = false;
        }
        if reachable {
            let term = if capped {
                pot.phi_capped(&image)
            } else {
                pot.phi(&image)
            };
            total += term;
            if total.is_infinite() {
                return f64::INFINITY;
            }
        }
        // odometer over the shell cube
        let mut done = true;
        for slot in r.iter_mut() {
            *slot += 1;
            if *slot <= k {
                done = false;
                break;
            }
            *slot = -k;
        }
        if done {
            break;
        }
    }
    total
}

/// Raw image force sum `sum_r grad phi(y + 2 lambda r)` with fixed shells.
pub(crate) fn raw_image_force_sum(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    shells: u32,
    out: &mut [f64],
) {
    let d = geometry.dim();
    let side = geometry.side();
    let range = pot.finite_range();
    let k = shells as i64;
    out.fill(0.0);
    let mut image = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut r = vec![-k; d];
    loop {
        let mut reachable = range > 0.0;
        for i in 0..d {
            image[i] = y[i] + side * r[i] as f64;
            if range > 0.0 && image[i].abs() > range {
                reachable = false;
            }
        }
        if reachable {
            pot.grad_phi(&image, &mut grad);
            for i in 0..d {
                out[i] += grad[i];
            }
        }
        let mut done = true;
        for slot in r.iter_mut() {
            *slot += 1;
            if *slot <= k {
                done = false;
                break;
            }
            *slot = -k;
        }
        if done {
            break;
        }
    }
}

/// Periodized pair potential supported on the open primary box: the lattice
/// sum of `phi` at `y`, zero whenever `|y| >= lambda`.
pub fn boxed_image_sum(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<f64> {
    if max_norm(y) >= geometry.half_side() {
        return Ok(0.0);
    }
    let shells = certified_shells(pot, geometry, policy, SumWindow::Primary)?;
    Ok(raw_image_sum(y, pot, geometry, shells, false))
}

/// Periodized pair potential supported on the open doubled box; coincides
/// with [`boxed_image_sum`] on the primary box and covers every difference
/// of two box points. This is the interaction entering the periodic energy.
pub fn wide_image_sum(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<f64> {
    if max_norm(y) >= geometry.side() {
        return Ok(0.0);
    }
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    Ok(raw_image_sum(y, pot, geometry, shells, false))
}

/// Like [`wide_image_sum`] but with the finite core cap.
pub fn wide_image_sum_capped(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<f64> {
    if max_norm(y) >= geometry.side() {
        return Ok(0.0);
    }
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    Ok(raw_image_sum(y, pot, geometry, shells, true))
}

/// Image force sum for in-box differences (`|y| < 2 lambda`).
pub fn image_force_sum(
    y: &[f64],
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
    out: &mut [f64],
) -> Result<()> {
    debug_assert!(max_norm(y) < geometry.side());
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    raw_image_force_sum(y, pot, geometry, shells, out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lj(d: usize) -> PotentialSpec {
        PotentialSpec::smoothed_lj(d, 0.25, 1.0, 1.3, 1.8).unwrap()
    }

    /// Wide brute-force sum over a large fixed cube of images.
    fn brute_image_sum(y: &[f64], pot: &PotentialSpec, geometry: &BoxGeometry, kmax: i64) -> f64 {
        let d = geometry.dim();
        let side = geometry.side();
        let mut total = 0.0;
        let mut r = vec![-kmax; d];
        let mut image = vec![0.0; d];
        loop {
            for i in 0..d {
                image[i] = y[i] + side * r[i] as f64;
            }
            total += pot.phi(&image);
            let mut done = true;
            for slot in r.iter_mut() {
                *slot += 1;
                if *slot <= kmax {
                    done = false;
                    break;
                }
                *slot = -kmax;
            }
            if done {
                break;
            }
        }
        total
    }

    #[test]
    fn indicator_zeroes_outside_windows() {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        assert_eq!(boxed_image_sum(&[1.0], &pot, &b, &policy).unwrap(), 0.0);
        assert_eq!(boxed_image_sum(&[-1.3], &pot, &b, &policy).unwrap(), 0.0);
        assert_eq!(wide_image_sum(&[2.0], &pot, &b, &policy).unwrap(), 0.0);
        assert!(wide_image_sum(&[1.5], &pot, &b, &policy).unwrap() != 0.0);
    }

    #[test]
    fn compact_support_inside_box_reduces_to_phi() {
        // support radius 1.8 < lambda = 2: only the r = 0 term survives on
        // points with |y| < 2 lambda - 1.8
        let pot = lj(1);
        let b = BoxGeometry::new(1, 2.0).unwrap();
        let policy = LatticeSumPolicy::default();
        for y in [0.4, 0.9, 1.3, 1.7] {
            let s = boxed_image_sum(&[y], &pot, &b, &policy).unwrap();
            assert!((s - pot.phi(&[y])).abs() < 1e-15, "y={y}");
        }
    }

    #[test]
    fn matches_wide_brute_force_within_certified_error() {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        let shells = certified_shells(&pot, &b, &policy, SumWindow::Primary).unwrap();
        let certified = tail_bound(&pot, &b, shells, SumWindow::Primary).unwrap();
        for y in [0.1, 0.25, 0.5, 0.75, 0.95] {
            let trunc = boxed_image_sum(&[y], &pot, &b, &policy).unwrap();
            let brute = brute_image_sum(&[y], &pot, &b, 10_000);
            assert!(
                (trunc - brute).abs() <= 2.0 * certified.max(1e-14),
                "y={y} trunc={trunc} brute={brute}"
            );
        }
    }

    #[test]
    fn wide_and_primary_coincide_on_primary_box() {
        let pot = lj(2);
        let b = BoxGeometry::new(2, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        for y in [[0.2, -0.4], [0.8, 0.8], [-0.95, 0.1]] {
            let a = boxed_image_sum(&y, &pot, &b, &policy).unwrap();
            let w = wide_image_sum(&y, &pot, &b, &policy).unwrap();
            assert!((a - w).abs() < 1e-14);
        }
    }

    #[test]
    fn image_sum_is_symmetric() {
        let pot = lj(2);
        let b = BoxGeometry::new(2, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        for y in [[0.3, 0.6], [1.2, -0.7], [1.9, 1.9]] {
            let neg = [-y[0], -y[1]];
            let a = wide_image_sum(&y, &pot, &b, &policy).unwrap();
            let s = wide_image_sum(&neg, &pot, &b, &policy).unwrap();
            assert!((a - s).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_shells_below_support_error_out() {
        // harmonic well spans 1.6 > lambda = 0.5, so shells = 0 cannot certify
        let pot = PotentialSpec::harmonic_well(1, 2.0, 1.2, 1.6).unwrap();
        let b = BoxGeometry::new(1, 0.5).unwrap();
        let policy = LatticeSumPolicy {
            shells: Some(0),
            target_abs_error: 1e-10,
        };
        assert!(matches!(
            certified_shells(&pot, &b, &policy, SumWindow::Primary),
            Err(Error::TailAboveTarget { .. })
        ));
    }

    #[test]
    fn singular_core_propagates_infinity() {
        let pot = lj(1);
        let b = BoxGeometry::new(1, 1.0).unwrap();
        let policy = LatticeSumPolicy::default();
        assert!(boxed_image_sum(&[0.0], &pot, &b, &policy)
            .unwrap()
            .is_infinite());
        let capped = wide_image_sum_capped(&[0.0], &pot, &b, &policy).unwrap();
        assert!(capped.is_finite() && capped >= pot.core_cap.cap);
    }
}
