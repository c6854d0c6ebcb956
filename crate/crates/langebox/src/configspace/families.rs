//! Default weight and test-function families for the configuration metrics.
//!
//! Any separating family works; determinism requires fixing one, so the
//! defaults are generated from a low-discrepancy enumeration controlled by a
//! few scale parameters that live in the metric config.

use crate::geom::eucl_norm;

/// Integrable spatial weight `h(x) = (1 + |x|^2)^{-d}`, values in (0, 1].
pub fn spatial_weight(dim: usize, x: &[f64]) -> f64 {
    let q: f64 = x.iter().map(|c| c * c).sum();
    (1.0 + q).powi(-(dim as i32))
}

/// Increasing surjective mark weight `a(v) = t^2/(1+t)` with `t = |v|`;
/// `a(0) = 0`, gradient and Laplacian bounded.
pub fn mark_weight(v: &[f64]) -> f64 {
    let t = eucl_norm(v);
    t * t / (1.0 + t)
}

/// Inverse of the scalar mark weight, by bisection.
pub fn mark_weight_inverse(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = y + 2.0; // a(t) >= t - 1 so t <= y + 1 suffices
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid / (1.0 + mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// C^1 plateau cutoff: 1 on `|x| <= k`, 0 beyond `k + 1`.
pub fn plateau_cutoff(k: usize, x: &[f64]) -> f64 {
    let r = eucl_norm(x);
    let t = r - k as f64;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Compactly supported C^2 bump `prod_i (1 - u_i^2)^3` on the cube of the
/// given radius around the center.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut prod = 1.0;
        for (c, &xc) in self.center.iter().zip(x) {
            let u = (xc - c) / self.radius;
            if u.abs() >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u * u;
            prod *= w * w * w;
        }
        prod
    }
}

/// Van der Corput radical-inverse in the given base.
fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while n > 0 {
        denom *= base as f64;
        inv += (n % base) as f64 / denom;
        n /= base;
    }
    inv
}

const AXIS_BASES: [u64; 3] = [2, 3, 5];

/// Deterministic enumeration of bump centers and radii over a cube of the
/// given extent; index 0 is the centered bump.
pub fn family_bump(index: usize, dim: usize, extent: f64, radii_cycle: &[f64]) -> Bump {
    assert!(dim <= AXIS_BASES.len());
    let center: Vec<f64> = (0..dim)
        .map(|axis| {
            if index == 0 {
                0.0
            } else {
                extent * (2.0 * radical_inverse(index as u64, AXIS_BASES[axis]) - 1.0)
            }
        })
        .collect();
    let radius = radii_cycle[index % radii_cycle.len()];
    Bump { center, radius }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_ranges() {
        assert_eq!(spatial_weight(2, &[0.0, 0.0]), 1.0);
        assert!(spatial_weight(2, &[3.0, -1.0]) > 0.0);
        assert!(spatial_weight(2, &[3.0, -1.0]) < 0.02);
        assert_eq!(mark_weight(&[0.0]), 0.0);
        assert!(mark_weight(&[2.0]) > mark_weight(&[1.0]));
    }

    #[test]
    fn mark_weight_inverse_round_trip() {
        for t in [0.1, 0.7, 2.5, 9.0] {
            let y = t * t / (1.0 + t);
            assert!((mark_weight_inverse(y) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn plateau_sandwich() {
        for k in 0..3usize {
            assert_eq!(plateau_cutoff(k, &[k as f64 * 0.99, 0.0]), 1.0);
            assert_eq!(plateau_cutoff(k, &[k as f64 + 1.0, 0.0]), 0.0);
            let mid = plateau_cutoff(k, &[k as f64 + 0.5, 0.0]);
            assert!(mid > 0.0 && mid < 1.0);
        }
    }

    #[test]
    fn bump_is_compactly_supported() {
        let b = family_bump(3, 2, 4.0, &[1.0, 2.0]);
        let inside: Vec<f64> = b.center.clone();
        assert!(b.value(&inside) > 0.0);
        let mut outside = b.center.clone();
        outside[0] += b.radius * 1.01;
        assert_eq!(b.value(&outside), 0.0);
    }

    #[test]
    fn family_members_differ() {
        let a = family_bump(1, 1, 4.0, &[1.0]);
        let b = family_bump(2, 1, 4.0, &[1.0]);
        assert_ne!(a.center, b.center);
    }
}
