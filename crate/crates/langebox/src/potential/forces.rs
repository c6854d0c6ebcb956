//! Pairwise periodic forces, with a direct path and a cell-list path.

use crate::error::{Error, Result};
use crate::geom::{BoxGeometry, PointSet};
use crate::potential::lattice::{
    certified_shells, raw_image_force_sum, LatticeSumPolicy, SumWindow,
};
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceMethod {
    Naive,
    CellList,
    /// Cell list when the geometry admits one, otherwise the direct loop.
    Auto,
}

/// Forces on every particle under the periodized potential: the force on
/// particle `i` is minus the image-summed gradient against every other
/// particle. Self images contribute zero by the antipodal cancellation of
/// the gradient sum, so they are simply not visited.
///
/// Pair contributions are accumulated antisymmetrically, so the total force
/// vanishes to machine precision within the truncation.
pub fn periodic_forces(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
    method: ForceMethod,
) -> Result<Vec<f64>> {
    let n = points.len();
    let mut wrapped = points.clone();
    for i in 0..n {
        geometry.wrap(wrapped.point_mut(i));
    }
    if let Some((i, j)) = wrapped.has_coincidence() {
        if pot.singular_core() {
            return Err(Error::CoincidentParticles { i, j });
        }
    }
    if pot.is_zero() {
        return Ok(vec![0.0; n * points.dim()]);
    }
    let use_cells = match method {
        ForceMethod::Naive => false,
        ForceMethod::CellList => true,
        ForceMethod::Auto => cell_grid(pot, geometry).is_some() && n >= 32,
    };
    if use_cells {
        match cell_grid(pot, geometry) {
            Some(cells) => cell_list_forces(&wrapped, pot, geometry, cells),
            None => Err(Error::Config(
                "cell list requires cutoff <= half side and at least 3 cells per axis".into(),
            )),
        }
    } else {
        naive_forces(&wrapped, pot, geometry, policy)
    }
}

fn naive_forces(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    policy: &LatticeSumPolicy,
) -> Result<Vec<f64>> {
    let n = points.len();
    let d = points.dim();
    let shells = certified_shells(pot, geometry, policy, SumWindow::Doubled)?;
    let mut forces = vec![0.0; n * d];
    let mut delta = vec![0.0; d];
    let mut g = vec![0.0; d];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points.point(i), points.point(j));
            for k in 0..d {
                delta[k] = a[k] - b[k];
            }
            raw_image_force_sum(&delta, pot, geometry, shells, &mut g);
            for k in 0..d {
                forces[i * d + k] -= g[k];
                forces[j * d + k] += g[k];
            }
        }
    }
    Ok(forces)
}

/// Cells per axis if a cell list applies: cutoff within the half side and at
/// least three cells per axis. Under these conditions only the minimum image
/// of a pair can interact, so a single-image force is exact.
fn cell_grid(pot: &PotentialSpec, geometry: &BoxGeometry) -> Option<usize> {
    let range = pot.finite_range();
    if range <= 0.0 || range > geometry.half_side() {
        return None;
    }
    let cells = (geometry.side() / range).floor() as usize;
    if cells >= 3 {
        Some(cells)
    } else {
        None
    }
}

fn cell_list_forces(
    points: &PointSet,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    cells: usize,
) -> Result<Vec<f64>> {
    let n = points.len();
    let d = points.dim();
    let side = geometry.side();
    let lambda = geometry.half_side();
    let cell_w = side / cells as f64;
    let n_cells = cells.pow(d as u32);

    let cell_of = |p: &[f64]| -> usize {
        let mut idx = 0;
        for k in 0..d {
            let mut c = ((p[k] + lambda) / cell_w) as usize;
            if c >= cells {
                c = cells - 1;
            }
            idx = idx * cells + c;
        }
        idx
    };

    let mut heads: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    for i in 0..n {
        heads[cell_of(points.point(i))].push(i);
    }

    // neighbor cell offsets, half stencil plus self cell
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    let mut off = vec![-1i64; d];
    loop {
        offsets.push(off.clone());
        let mut done = true;
        for slot in off.iter_mut() {
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

    let decode = |mut idx: usize| -> Vec<i64> {
        let mut c = vec![0i64; d];
        for k in (0..d).rev() {
            c[k] = (idx % cells) as i64;
            idx /= cells;
        }
        c
    };

    let mut forces = vec![0.0; n * d];
    let mut g = vec![0.0; d];
    for cell in 0..n_cells {
        if heads[cell].is_empty() {
            continue;
        }
        let base = decode(cell);
        for offset in &offsets {
            let mut neigh = 0usize;
            for k in 0..d {
                let c = (base[k] + offset[k]).rem_euclid(cells as i64) as usize;
                neigh = neigh * cells + c;
            }
            if neigh < cell {
                continue;
            }
            for (a_pos, &i) in heads[cell].iter().enumerate() {
                let start = if neigh == cell { a_pos + 1 } else { 0 };
                for &j in &heads[neigh][start..] {
                    let delta = geometry.min_image_delta(points.point(i), points.point(j));
                    if crate::geom::eucl_norm(&delta) > pot.finite_range() {
                        continue;
                    }
                    pot.grad_phi(&delta, &mut g);
                    for k in 0..d {
                        forces[i * d + k] -= g[k];
                        forces[j * d + k] += g[k];
                    }
                }
            }
        }
    }
    Ok(forces)
}
