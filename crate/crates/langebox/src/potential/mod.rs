//! Symmetric pair potentials with declared regularity constants.
//!
//! A potential carries, next to its evaluators, the constants of the
//! classical regularity conditions: a lower bound (`phi >= -M`), a repulsion
//! envelope near the origin, algebraic tail decay and a decreasing force
//! envelope at large distance. All built-in models are radial with a C^2
//! switched cutoff, so the tail constants are certified by compact support.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::eucl_norm;

pub mod bounds;
pub mod energy;
pub mod forces;
pub mod lattice;
pub mod minorant;

pub use bounds::{check_uniform_bounds, UniformBoundsReport};
pub use lattice::LatticeSumPolicy;
pub use minorant::{build_repulsion_minorant, MinorantOptions, RepulsionMinorant};

/// Algebraic tail decay `|phi(x)| <= g |x|^{-d-eps}` beyond the core radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDecay {
    pub g: f64,
    pub eps: f64,
}

/// Declared regularity data of a pair potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// `phi >= -lower_bound_m` everywhere.
    pub lower_bound_m: f64,
    /// Radius below which the repulsion envelope applies (max norm).
    pub core_radius: f64,
    /// Tail decay constants; `None` marks a potential without certified tail.
    pub tail: Option<TailDecay>,
    /// Distance beyond which the force envelope applies.
    pub force_tail_r3: f64,
}

/// Finite arithmetic convention at the singular core: exact evaluation
/// returns infinity below `r_min`; proposal evaluation returns `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreCap {
    pub r_min: f64,
    pub cap: f64,
}

impl Default for CoreCap {
    fn default() -> Self {
        CoreCap {
            r_min: 1e-6,
            cap: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialModel {
    /// `phi == 0`; the reference non-interacting gas.
    IdealGas,
    /// 12-6 Lennard-Jones, switched to zero over `[r_on, r_cut]` by a
    /// quintic C^2 ramp.
    SmoothedLj {
        epsilon: f64,
        sigma: f64,
        r_on: f64,
        r_cut: f64,
    },
    /// Purely repulsive inverse power `eps (sigma/r)^p`, switched like above.
    SoftCore {
        epsilon: f64,
        sigma: f64,
        exponent: f64,
        r_on: f64,
        r_cut: f64,
    },
    /// Bounded pair spring `k r^2 / 2`, switched to zero; test potential with
    /// an exact Gaussian reference in the confined regime.
    HarmonicWell { stiffness: f64, r_on: f64, r_cut: f64 },
}

/// Quintic switch: 1 on the left edge, 0 on the right edge, C^2 at both.
fn switch(u: f64) -> (f64, f64) {
    let s = 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let ds = -30.0 * u * u * (1.0 - u) * (1.0 - u);
    (s, ds)
}

const ENVELOPE_GRID: usize = 2048;

/// A pair potential plus its declared constants and core convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    dim: usize,
    pub model: PotentialModel,
    pub constants: RegularityConstants,
    pub core_cap: CoreCap,
    /// Decreasing force envelope theta sampled on `[r3, range]`.
    force_envelope_grid: Vec<f64>,
}

impl PotentialSpec {
    pub fn ideal_gas(dim: usize) -> Self {
        PotentialSpec {
            dim,
            model: PotentialModel::IdealGas,
            constants: RegularityConstants {
                lower_bound_m: 0.0,
                core_radius: 1.0,
                tail: Some(TailDecay { g: 0.0, eps: 1.0 }),
                force_tail_r3: 1.0,
            },
            core_cap: CoreCap::default(),
            force_envelope_grid: vec![0.0; 2],
        }
    }

    pub fn smoothed_lj(dim: usize, epsilon: f64, sigma: f64, r_on: f64, r_cut: f64) -> Result<Self> {
        if !(epsilon > 0.0 && sigma > 0.0) {
            return Err(Error::Config("lj parameters must be positive".into()));
        }
        if !(sigma <= r_on && r_on < r_cut) {
            return Err(Error::Config(
                "lj switch window must satisfy sigma <= r_on < r_cut".into(),
            ));
        }
        let model = PotentialModel::SmoothedLj {
            epsilon,
            sigma,
            r_on,
            r_cut,
        };
        Ok(Self::finish(dim, model, sigma / (dim as f64).sqrt(), r_cut))
    }

    pub fn soft_core(
        dim: usize,
        epsilon: f64,
        sigma: f64,
        exponent: f64,
        r_on: f64,
        r_cut: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && sigma > 0.0 && r_on < r_cut) {
            return Err(Error::Config("soft core parameters invalid".into()));
        }
        if exponent <= dim as f64 {
            return Err(Error::Config(
                "soft core exponent must exceed the dimension for a repulsion envelope".into(),
            ));
        }
        let model = PotentialModel::SoftCore {
            epsilon,
            sigma,
            exponent,
            r_on,
            r_cut,
        };
        Ok(Self::finish(dim, model, r_on / (dim as f64).sqrt(), r_cut))
    }

    pub fn harmonic_well(dim: usize, stiffness: f64, r_on: f64, r_cut: f64) -> Result<Self> {
        if !(stiffness > 0.0 && 0.0 < r_on && r_on < r_cut) {
            return Err(Error::Config("harmonic well parameters invalid".into()));
        }
        let model = PotentialModel::HarmonicWell {
            stiffness,
            r_on,
            r_cut,
        };
        Ok(Self::finish(dim, model, r_on / (dim as f64).sqrt(), r_cut))
    }

    fn finish(dim: usize, model: PotentialModel, core_radius: f64, r_cut: f64) -> Self {
        let mut spec = PotentialSpec {
            dim,
            model,
            constants: RegularityConstants {
                lower_bound_m: 0.0,
                core_radius,
                tail: None,
                force_tail_r3: core_radius,
            },
            core_cap: CoreCap::default(),
            force_envelope_grid: Vec::new(),
        };
        // lower bound: LJ is >= -epsilon and the switch only damps toward 0;
        // the repulsive models are nonnegative
        spec.constants.lower_bound_m = match spec.model {
            PotentialModel::SmoothedLj { epsilon, .. } => epsilon,
            _ => 0.0,
        };
        // tail constant from the bounded mid range [R, r_cut]; support ends
        // at r_cut so any larger distance contributes zero
        let eps_t = 1.0;
        let mut fmax: f64 = 0.0;
        for k in 0..=ENVELOPE_GRID {
            let r = core_radius
                + (r_cut - core_radius) * (k as f64) / (ENVELOPE_GRID as f64);
            fmax = fmax.max(spec.radial(r.max(spec.core_cap.r_min)).abs());
        }
        spec.constants.tail = Some(TailDecay {
            g: 1.05 * fmax * r_cut.powf(dim as f64 + eps_t),
            eps: eps_t,
        });
        // decreasing force envelope: running suffix max of |phi'| on [R, r_cut]
        let mut env = vec![0.0; ENVELOPE_GRID + 1];
        for k in 0..=ENVELOPE_GRID {
            let r = core_radius
                + (r_cut - core_radius) * (k as f64) / (ENVELOPE_GRID as f64);
            env[k] = spec.radial_deriv(r.max(spec.core_cap.r_min)).abs();
        }
        for k in (0..ENVELOPE_GRID).rev() {
            env[k] = env[k].max(env[k + 1]);
        }
        spec.force_envelope_grid = env;
        spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the model diverges at contact.
    pub fn singular_core(&self) -> bool {
        matches!(
            self.model,
            PotentialModel::SmoothedLj { .. } | PotentialModel::SoftCore { .. }
        )
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.model, PotentialModel::IdealGas)
    }

    /// Euclidean support radius; interactions vanish beyond it.
    pub fn finite_range(&self) -> f64 {
        match self.model {
            PotentialModel::IdealGas => 0.0,
            PotentialModel::SmoothedLj { r_cut, .. }
            | PotentialModel::SoftCore { r_cut, .. }
            | PotentialModel::HarmonicWell { r_cut, .. } => r_cut,
        }
    }

    /// Radial profile `f(r)` with `phi(x) = f(|x|_2)`, without core handling.
    pub fn radial(&self, r: f64) -> f64 {
        match self.model {
            PotentialModel::IdealGas => 0.0,
            PotentialModel::SmoothedLj {
                epsilon,
                sigma,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let s6 = (sigma / r).powi(6);
                let raw = 4.0 * epsilon * (s6 * s6 - s6);
                if r <= r_on {
                    raw
                } else {
                    let (s, _) = switch((r - r_on) / (r_cut - r_on));
                    raw * s
                }
            }
            PotentialModel::SoftCore {
                epsilon,
                sigma,
                exponent,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let raw = epsilon * (sigma / r).powf(exponent);
                if r <= r_on {
                    raw
                } else {
                    let (s, _) = switch((r - r_on) / (r_cut - r_on));
                    raw * s
                }
            }
            PotentialModel::HarmonicWell {
                stiffness,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let raw = 0.5 * stiffness * r * r;
                if r <= r_on {
                    raw
                } else {
                    let (s, _) = switch((r - r_on) / (r_cut - r_on));
                    raw * s
                }
            }
        }
    }

    /// Radial derivative `f'(r)`.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        match self.model {
            PotentialModel::IdealGas => 0.0,
            PotentialModel::SmoothedLj {
                epsilon,
                sigma,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let s6 = (sigma / r).powi(6);
                let raw = 4.0 * epsilon * (s6 * s6 - s6);
                let draw = 4.0 * epsilon * (-12.0 * s6 * s6 + 6.0 * s6) / r;
                if r <= r_on {
                    draw
                } else {
                    let w = r_cut - r_on;
                    let (s, ds) = switch((r - r_on) / w);
                    draw * s + raw * ds / w
                }
            }
            PotentialModel::SoftCore {
                epsilon,
                sigma,
                exponent,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let raw = epsilon * (sigma / r).powf(exponent);
                let draw = -exponent * raw / r;
                if r <= r_on {
                    draw
                } else {
                    let w = r_cut - r_on;
                    let (s, ds) = switch((r - r_on) / w);
                    draw * s + raw * ds / w
                }
            }
            PotentialModel::HarmonicWell {
                stiffness,
                r_on,
                r_cut,
            } => {
                if r >= r_cut {
                    return 0.0;
                }
                let raw = 0.5 * stiffness * r * r;
                let draw = stiffness * r;
                if r <= r_on {
                    draw
                } else {
                    let w = r_cut - r_on;
                    let (s, ds) = switch((r - r_on) / w);
                    draw * s + raw * ds / w
                }
            }
        }
    }

    /// Exact pair energy at separation `y`; infinite inside the core cutoff
    /// of a singular model.
    pub fn phi(&self, y: &[f64]) -> f64 {
        let r = eucl_norm(y);
        if self.singular_core() && r < self.core_cap.r_min {
            return f64::INFINITY;
        }
        self.radial(r)
    }

    /// Pair energy with the finite core cap, for proposal arithmetic.
    pub fn phi_capped(&self, y: &[f64]) -> f64 {
        let r = eucl_norm(y);
        if self.singular_core() && r < self.core_cap.r_min {
            return self.core_cap.cap;
        }
        self.radial(r).min(self.core_cap.cap)
    }

    /// Pair force gradient `grad phi(y)`, written into `out`.
    /// At exact coincidence the gradient is set to zero; callers that need a
    /// defined force must reject coincident particles beforehand.
    pub fn grad_phi(&self, y: &[f64], out: &mut [f64]) {
        let r = eucl_norm(y);
        if r == 0.0 {
            out.fill(0.0);
            return;
        }
        let scale = self.radial_deriv(r) / r;
        for (o, &c) in out.iter_mut().zip(y) {
            *o = scale * c;
        }
    }

    /// Repulsion envelope `Phi(t)` in the max norm: `phi(x) >= Phi(|x|)` for
    /// `|x| <= core_radius`. Zero function for models without a divergent core.
    pub fn repulsion(&self, t: f64) -> f64 {
        let root_d = (self.dim as f64).sqrt();
        match self.model {
            PotentialModel::SmoothedLj { epsilon, sigma, .. } => {
                let r = root_d * t;
                let s6 = (sigma / r).powi(6);
                (4.0 * epsilon * (s6 * s6 - s6)).max(0.0)
            }
            PotentialModel::SoftCore {
                epsilon,
                sigma,
                exponent,
                ..
            } => epsilon * (sigma / (root_d * t)).powf(exponent),
            _ => 0.0,
        }
    }

    /// Whether the model declares a divergent repulsion envelope.
    pub fn has_repulsion(&self) -> bool {
        matches!(
            self.model,
            PotentialModel::SmoothedLj { .. } | PotentialModel::SoftCore { .. }
        )
    }

    /// Decreasing force envelope `theta(t)`: `|grad phi(x)| <= theta(|x|)`
    /// for `|x| >= force_tail_r3`.
    pub fn force_envelope(&self, t: f64) -> f64 {
        let r3 = self.constants.force_tail_r3;
        let range = self.finite_range();
        if t >= range || self.force_envelope_grid.len() < 2 {
            return 0.0;
        }
        let t = t.max(r3);
        let u = (t - r3) / (range - r3) * (self.force_envelope_grid.len() - 1) as f64;
        let k = (u as usize).min(self.force_envelope_grid.len() - 2);
        // envelope is a suffix max, so the left grid value dominates the cell
        self.force_envelope_grid[k]
    }

    /// Structured description for config files and snapshot headers.
    pub fn to_config(&self) -> PotentialConfig {
        let mut params = BTreeMap::new();
        let name = match self.model {
            PotentialModel::IdealGas => "ideal_gas",
            PotentialModel::SmoothedLj {
                epsilon,
                sigma,
                r_on,
                r_cut,
            } => {
                params.insert("epsilon".into(), epsilon);
                params.insert("sigma".into(), sigma);
                params.insert("r_on".into(), r_on);
                params.insert("r_cut".into(), r_cut);
                "smoothed_lj"
            }
            PotentialModel::SoftCore {
                epsilon,
                sigma,
                exponent,
                r_on,
                r_cut,
            } => {
                params.insert("epsilon".into(), epsilon);
                params.insert("sigma".into(), sigma);
                params.insert("exponent".into(), exponent);
                params.insert("r_on".into(), r_on);
                params.insert("r_cut".into(), r_cut);
                "soft_core"
            }
            PotentialModel::HarmonicWell {
                stiffness,
                r_on,
                r_cut,
            } => {
                params.insert("stiffness".into(), stiffness);
                params.insert("r_on".into(), r_on);
                params.insert("r_cut".into(), r_cut);
                "harmonic_well"
            }
        };
        PotentialConfig {
            name: name.to_string(),
            params,
        }
    }

    pub fn from_config(dim: usize, cfg: &PotentialConfig) -> Result<Self> {
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            cfg.params.get(key).copied().or(default).ok_or_else(|| {
                Error::Config(format!("potential '{}' missing parameter '{key}'", cfg.name))
            })
        };
        match cfg.name.as_str() {
            "ideal_gas" => Ok(Self::ideal_gas(dim)),
            "smoothed_lj" => Self::smoothed_lj(
                dim,
                get("epsilon", Some(0.25))?,
                get("sigma", Some(1.0))?,
                get("r_on", Some(1.3))?,
                get("r_cut", Some(1.8))?,
            ),
            "soft_core" => Self::soft_core(
                dim,
                get("epsilon", Some(1.0))?,
                get("sigma", Some(1.0))?,
                get("exponent", Some(6.0))?,
                get("r_on", Some(1.2))?,
                get("r_cut", Some(1.6))?,
            ),
            "harmonic_well" => Self::harmonic_well(
                dim,
                get("stiffness", Some(2.0))?,
                get("r_on", Some(1.2))?,
                get("r_cut", Some(1.6))?,
            ),
            other => Err(Error::Config(format!("unknown potential '{other}'"))),
        }
    }
}

/// Named potential with numeric parameters, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lj() -> PotentialSpec {
        PotentialSpec::smoothed_lj(1, 0.25, 1.0, 1.3, 1.8).unwrap()
    }

    #[test]
    fn switch_is_c2_at_edges() {
        let (s0, d0) = switch(0.0);
        let (s1, d1) = switch(1.0);
        assert_eq!((s0, d0), (1.0, 0.0));
        assert_eq!((s1, d1), (0.0, 0.0));
    }

    #[test]
    fn radial_deriv_matches_finite_differences() {
        for pot in [
            lj(),
            PotentialSpec::soft_core(1, 1.0, 1.0, 6.0, 1.2, 1.6).unwrap(),
            PotentialSpec::harmonic_well(1, 2.0, 1.2, 1.6).unwrap(),
        ] {
            let h = 1e-5;
            for r in [0.8, 0.95, 1.1, 1.35, 1.55, 1.75] {
                let fd = (pot.radial(r + h) - pot.radial(r - h)) / (2.0 * h);
                let an = pot.radial_deriv(r);
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
                    "r={r} fd={fd} an={an}"
                );
            }
        }
    }

    #[test]
    fn symmetry_and_lower_bound() {
        let pot = lj();
        for y in [[0.3], [0.9], [1.2], [1.7], [2.5]] {
            let neg = [-y[0]];
            assert_eq!(pot.phi(&y), pot.phi(&neg));
            assert!(pot.phi(&y) >= -pot.constants.lower_bound_m - 1e-15);
        }
    }

    #[test]
    fn repulsion_envelope_holds_below_core_radius() {
        for d in [1usize, 2] {
            let pot = PotentialSpec::smoothed_lj(d, 0.25, 1.0, 1.3, 1.8).unwrap();
            let rc = pot.constants.core_radius;
            for k in 1..40 {
                let t = rc * k as f64 / 40.0;
                // worst case position at max-norm distance t
                let mut x = vec![t; d];
                x[0] = t;
                let phi = pot.phi(&x);
                assert!(
                    phi >= pot.repulsion(t) - 1e-12,
                    "d={d} t={t} phi={phi} env={}",
                    pot.repulsion(t)
                );
            }
        }
    }

    #[test]
    fn tail_bound_holds_beyond_core_radius() {
        let pot = lj();
        let tail = pot.constants.tail.unwrap();
        let d = 1.0;
        for k in 0..200 {
            let t = pot.constants.core_radius + 0.01 * k as f64;
            let phi = pot.phi(&[t]).abs();
            assert!(phi <= tail.g * t.powf(-d - tail.eps) + 1e-12, "t={t}");
        }
    }

    #[test]
    fn force_envelope_dominates_gradient() {
        let pot = lj();
        let mut g = [0.0];
        for k in 0..300 {
            let t = pot.constants.force_tail_r3 + 0.005 * k as f64;
            pot.grad_phi(&[t], &mut g);
            assert!(
                g[0].abs() <= pot.force_envelope(t) * (1.0 + 1e-9) + 1e-12,
                "t={t} g={} env={}",
                g[0],
                pot.force_envelope(t)
            );
        }
    }

    #[test]
    fn core_cap_convention() {
        let pot = lj();
        assert!(pot.phi(&[1e-9]).is_infinite());
        assert_eq!(pot.phi_capped(&[1e-9]), pot.core_cap.cap);
        let harm = PotentialSpec::harmonic_well(1, 2.0, 1.2, 1.6).unwrap();
        assert_eq!(harm.phi(&[0.0]), 0.0);
    }

    #[test]
    fn config_round_trip() {
        let pot = lj();
        let cfg = pot.to_config();
        let back = PotentialSpec::from_config(1, &cfg).unwrap();
        assert_eq!(back.model, pot.model);
    }
}
