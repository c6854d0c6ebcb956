//! Configurational and interaction energies, free and periodic.

use crate::error::{Error, Result};
use crate::geom::{max_norm, BoxGeometry, PointSet};
use crate::potential::lattice::{
    certified_shells, raw_image_sum, LatticeSumPolicy, SumWindow,
};
use crate::potential::PotentialSpec;

/// Free-space configurational energy: the pair sum of `phi` over a finite
/// configuration. Coinciding points yield infinity.
pub fn config_energy(points: &PointSet, pot: &PotentialSpec) -> f64 {
    let n = points.len();
    let d = points.dim();
    let mut delta = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points.point(i), points.point(j));
            for k in 0..d {
                delta[k] = a[k] - b[k];
            }
            if delta.iter().all(|&c| c == 0.0) {
                return f64::INFINITY;
            }
            total += pot.phi(&delta);
            if total.is_infinite() {
                return f64::INFINITY;
            }
        }
    }
    total
}

/// Cross interaction energy of two disjoint configurations.
pub fn interaction_energy(
    first: &PointSet,
    second: &PointSet,
    pot: &PotentialSpec,
) -> Result<f64> {
    for (idx, p) in first.iter().enumerate() {
        if second.iter().any(|q| q == p) {
            return Err(Error::OverlappingConfigurations { index: idx });
        }
    }
    let d = first.dim();
    let mut delta = vec![0.0; d];
    let mut total = 0.0;
    for a in first.iter() {
        for b in second.iter() {
            for k in 0..d {
                delta[k] = a[k] - b[k];
            }
            total += pot.phi(&delta);
            if total.is_infinite() {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(total)
}

/// Configurational energy with periodic boundary: every unordered pair
/// interacts through the full lattice image sum. Interactions between a
/// particle and its own copies are not counted.
pub fn periodic_energy(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<f64> {
    periodic_energy_impl(points, pot, geometry, policy, false)
}

/// Periodic energy in proposal arithmetic (finite core cap).
pub fn periodic_energy_capped(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<f64> {
    periodic_energy_impl(points, pot, geometry, policy, true)
}

fn periodic_energy_impl(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
    capped: bool,
) -> Result<f64> {
    if pot.is_zero() {
        return Ok(0.0);
    }
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    let n = points.len();
    let d = points.dim();
    let mut delta = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points.point(i), points.point(j));
            for k in 0..d {
                delta[k] = a[k] - b[k];
            }
            total += raw_image_sum(&delta, pot, geometry, shells, capped);
            if total.is_infinite() {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(total)
}

/// Lattice vectors of max norm one with one representative per antipodal
/// pair, chosen by lexicographic positivity of the first nonzero entry.
fn antipodal_representatives(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut r = vec![-1i64; dim];
    loop {
        let lex_positive = r
            .iter()
            .find(|&&c| c != 0)
            .map(|&c| c > 0)
            .unwrap_or(false);
        if lex_positive {
            out.push(r.clone());
        }
        let mut done = true;
        for slot in r.iter_mut() {
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
    out
}

/// Split the periodic energy into a cross-boundary interaction part and a
/// bulk part evaluated with the box-supported periodized potential.
///
/// The cross part pairs the configuration with those periodic copies that
/// fall into the half-shell built from one representative of each antipodal
/// neighbor direction; the two parts sum back to [`periodic_energy`].
/// Requires strict distances: no coordinate difference may equal the half
/// side exactly.
pub fn decompose_periodic_energy(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<(f64, f64)> {
    let d = points.dim();
    let n = points.len();
    let lambda = geometry.half_side();
    let side = geometry.side();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points.point(i), points.point(j));
            if (0..d).any(|k| (a[k] - b[k]).abs() == lambda) {
                return Err(Error::DistancesNotStrict);
            }
        }
    }

    let shells = certified_shells(pot, geometry, policy, SumWindow::Primary)?;
    let boxed_phi = |y: &[f64]| -> f64 {
        if max_norm(y) >= lambda {
            0.0
        } else {
            raw_image_sum(y, pot, geometry, shells, false)
        }
    };

    // bulk part: pair sum of the box-supported periodized potential
    let mut bulk = 0.0;
    let mut delta = vec![0.0; d];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points.point(i), points.point(j));
            for k in 0..d {
                delta[k] = a[k] - b[k];
            }
            bulk += boxed_phi(&delta);
        }
    }

    // cross part: interactions with periodic copies in the selected
    // half-shell of neighbor image boxes, clipped to the doubled box
    let mut cross = 0.0;
    let mut image = vec![0.0; d];
    for rep in antipodal_representatives(d) {
        for j in 0..n {
            let q = points.point(j);
            for k in 0..d {
                image[k] = q[k] + side * rep[k] as f64;
            }
            if !image.iter().all(|&c| -side < c && c <= side) {
                continue;
            }
            for i in 0..n {
                let p = points.point(i);
                for k in 0..d {
                    delta[k] = p[k] - image[k];
                }
                cross += boxed_phi(&delta);
            }
        }
    }
    Ok((cross, bulk))
}
