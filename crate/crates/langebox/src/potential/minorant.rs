//! Smooth minorant of a divergent repulsion envelope.
//!
//! Given a decreasing continuous envelope with `Phi(t) t^d -> infinity` at
//! the origin, builds a continuously differentiable minorant that still
//! diverges like `t^{-d}` times an unbounded factor and whose derivative is
//! tamed by any exponential of the function itself. The construction places
//! knots `s_k` where the envelope clears level `k t^{-d}`, takes the
//! piecewise slope field between the two staircase minorants, and integrates
//! a continuous interpolation of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MinorantOptions {
    /// Maximum number of levels (knots).
    pub k_max: usize,
    /// Log-spaced grid points used to probe the envelope.
    pub grid_points: usize,
    /// Smallest probed radius.
    pub s_floor: f64,
    /// Minimum number of levels the envelope must support.
    pub k_min: usize,
}

impl Default for MinorantOptions {
    fn default() -> Self {
        MinorantOptions {
            k_max: 32,
            grid_points: 4096,
            s_floor: 1e-8,
            k_min: 3,
        }
    }
}

/// Piecewise-integrated smooth minorant; decreasing, zero beyond the first
/// knot, with `value(s) * s^d` increasing without bound along the knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepulsionMinorant {
    dim: usize,
    /// Knots in decreasing order; `knots[k-1]` is `s_k`.
    knots: Vec<f64>,
    /// Function values at the knots.
    knot_values: Vec<f64>,
}

/// Slope field value at level index `k` (1-based): `theta(s_k) = -d (k-1)`.
fn theta_at_knot(dim: usize, k: usize) -> f64 {
    -(dim as f64) * (k as f64 - 1.0)
}

/// Integral of `(alpha + beta t) t^{-d-1}` over `[a, b]`.
fn segment_integral(dim: usize, alpha: f64, beta: f64, a: f64, b: f64) -> f64 {
    let d = dim as f64;
    let part1 = alpha * (b.powf(-d) - a.powf(-d)) / (-d);
    let part2 = if dim == 1 {
        beta * (b.ln() - a.ln())
    } else {
        beta * (b.powf(1.0 - d) - a.powf(1.0 - d)) / (1.0 - d)
    };
    part1 + part2
}

impl RepulsionMinorant {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// First knot; the function vanishes at and beyond it.
    pub fn support_radius(&self) -> f64 {
        self.knots[0]
    }

    /// Continuous slope field `theta(s)`; zero beyond the first knot,
    /// frozen below the last.
    fn theta(&self, s: f64) -> f64 {
        let n = self.knots.len();
        if s >= self.knots[0] {
            return 0.0;
        }
        if s <= self.knots[n - 1] {
            return theta_at_knot(self.dim, n);
        }
        // knots are decreasing; find the segment [s_{k+1}, s_k] containing s
        let pos = self.knots.partition_point(|&k| k > s);
        let (hi, lo) = (self.knots[pos - 1], self.knots[pos]);
        let t_hi = theta_at_knot(self.dim, pos);
        let t_lo = theta_at_knot(self.dim, pos + 1);
        t_hi + (t_lo - t_hi) * (s - hi) / (lo - hi)
    }

    pub fn value(&self, s: f64) -> f64 {
        let n = self.knots.len();
        if s >= self.knots[0] {
            return 0.0;
        }
        if s <= self.knots[n - 1] {
            // constant slope continuation below the last knot
            let k = n as f64;
            let d = self.dim as f64;
            let last = self.knots[n - 1];
            return self.knot_values[n - 1]
                + (k - 1.0) * (s.powf(-d) - last.powf(-d));
        }
        let pos = self.knots.partition_point(|&k| k > s);
        let (hi, lo) = (self.knots[pos - 1], self.knots[pos]);
        let t_hi = theta_at_knot(self.dim, pos);
        let t_lo = theta_at_knot(self.dim, pos + 1);
        let beta = (t_lo - t_hi) / (lo - hi);
        let alpha = t_hi - beta * hi;
        // value(s) = value(hi) - int_s^hi theta t^{-d-1}
        self.knot_values[pos - 1] - segment_integral(self.dim, alpha, beta, s, hi)
    }

    /// Derivative `theta(s) s^{-d-1}`; continuous and nonpositive.
    pub fn deriv(&self, s: f64) -> f64 {
        self.theta(s) * s.powf(-(self.dim as f64) - 1.0)
    }

    /// Supremum of `exp(-a value) |deriv|` over a log grid; finite for any
    /// `a > 0` because the value diverges like `s^{-d}` while the derivative
    /// grows polynomially.
    pub fn damped_derivative_sup(&self, a: f64, probes: usize) -> f64 {
        let hi = self.knots[0] * 1.5;
        let lo = self.knots[self.knots.len() - 1] * 1e-3;
        let mut sup: f64 = 0.0;
        for i in 0..probes {
            let s = hi * (lo / hi).powf(i as f64 / (probes - 1) as f64);
            sup = sup.max((-a * self.value(s)).exp() * self.deriv(s).abs());
        }
        sup
    }
}

/// Build the minorant for a decreasing envelope `phi`.
///
/// Fails with [`Error::NotRepulsiveEnough`] when the probed grid cannot
/// support the required divergence levels.
pub fn build_repulsion_minorant<F>(
    phi: F,
    dim: usize,
    opts: &MinorantOptions,
) -> Result<RepulsionMinorant>
where
    F: Fn(f64) -> f64,
{
    let n = opts.grid_points;
    let d = dim as f64;
    // ascending log grid on [s_floor, 1]
    let grid: Vec<f64> = (0..n)
        .map(|i| opts.s_floor * (1.0 / opts.s_floor).powf(i as f64 / (n - 1) as f64))
        .collect();
    // running infimum of phi(u) u^d from the origin side
    let mut inf_from_left = vec![0.0; n];
    let mut running = f64::INFINITY;
    for (i, &u) in grid.iter().enumerate() {
        running = running.min(phi(u) * u.powf(d));
        inf_from_left[i] = running;
    }

    let mut knots = Vec::new();
    let mut prev = f64::INFINITY;
    for k in 1..=opts.k_max {
        let cap = prev.min(1.0 / k as f64);
        // largest grid point below the cap whose left-infimum clears level k
        let mut found = None;
        for i in (0..n).rev() {
            if grid[i] < cap && inf_from_left[i] >= k as f64 {
                found = Some(grid[i]);
                break;
            }
        }
        match found {
            Some(s) => {
                knots.push(s);
                prev = s;
            }
            None => break,
        }
    }
    if knots.len() < opts.k_min {
        return Err(Error::NotRepulsiveEnough(format!(
            "envelope supports only {} divergence levels on the probe grid",
            knots.len()
        )));
    }

    // integrate the slope field downward from the first knot
    let mut knot_values = vec![0.0; knots.len()];
    for pos in 1..knots.len() {
        let (hi, lo) = (knots[pos - 1], knots[pos]);
        let t_hi = theta_at_knot(dim, pos);
        let t_lo = theta_at_knot(dim, pos + 1);
        let beta = (t_lo - t_hi) / (lo - hi);
        let alpha = t_hi - beta * hi;
        knot_values[pos] = knot_values[pos - 1] - segment_integral(dim, alpha, beta, lo, hi);
    }

    Ok(RepulsionMinorant {
        dim,
        knots,
        knot_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minorant_of_power_law_envelope() {
        let dim = 1;
        let phi = |t: f64| t.powf(-2.0 * dim as f64);
        let m = build_repulsion_minorant(phi, dim, &MinorantOptions::default()).unwrap();

        // minorant property on a grid
        for i in 1..200 {
            let s = 1.2 * i as f64 / 200.0;
            assert!(
                m.value(s) <= phi(s) + 1e-9,
                "s={s} value={} phi={}",
                m.value(s),
                phi(s)
            );
            assert!(m.value(s) >= 0.0);
        }
        // zero beyond the first knot
        assert_eq!(m.value(m.support_radius()), 0.0);
        assert_eq!(m.value(2.0), 0.0);
        // divergence along a shrinking grid: value * s^d grows
        let mut prev = 0.0;
        let mut grew = 0;
        for j in 1..24 {
            let s = m.support_radius() * 0.5f64.powi(j);
            let v = m.value(s) * s.powf(dim as f64);
            assert!(v + 1e-12 >= prev, "not monotone at {s}: {v} < {prev}");
            if v > prev {
                grew += 1;
            }
            prev = v;
        }
        assert!(grew > 10);
        assert!(prev > 5.0, "divergence level only reached {prev}");
    }

    #[test]
    fn derivative_is_continuous_and_damped() {
        let m = build_repulsion_minorant(|t| t.powf(-4.0), 2, &MinorantOptions::default()).unwrap();
        // derivative continuity at a knot (approach from both sides)
        let s = m.support_radius() * 0.7;
        let h = 1e-9;
        assert!((m.deriv(s - h) - m.deriv(s + h)).abs() < 1e-3 * (1.0 + m.deriv(s).abs()));
        // finite difference agreement in a smooth region
        let fd = (m.value(s + 1e-6) - m.value(s - 1e-6)) / 2e-6;
        assert!((fd - m.deriv(s)).abs() < 1e-4 * (1.0 + m.deriv(s).abs()));
        for a in [1.0 / 6.0, 1.0 / 3.0] {
            assert!(m.damped_derivative_sup(a, 4000).is_finite());
        }
    }

    #[test]
    fn bounded_envelope_is_rejected() {
        // large constant near zero but phi(t) t^d bounded
        let phi = |t: f64| if t < 0.5 { 100.0 } else { 1.0 / t };
        assert!(matches!(
            build_repulsion_minorant(phi, 1, &MinorantOptions::default()),
            Err(Error::NotRepulsiveEnough(_))
        ));
    }

    #[test]
    fn lj_core_envelope_works() {
        let pot = crate::potential::PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap();
        let m = build_repulsion_minorant(|t| pot.repulsion(t), 1, &MinorantOptions::default())
            .unwrap();
        for i in 1..100 {
            let s = i as f64 / 100.0;
            assert!(m.value(s) <= pot.repulsion(s) + 1e-9, "s={s}");
        }
    }
}
