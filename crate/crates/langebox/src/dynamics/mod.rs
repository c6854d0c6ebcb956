//! Kinetic Langevin dynamics on the periodic box and its statistical
//! verification: invariance of the canonical ensemble, the martingale
//! structure of cylinder observables, quadratic variation, and the moment
//! bound behind path-law tightness.

pub mod baoab;
pub mod checks;

pub use baoab::{evolve, lift_periodic, run_trajectory, step_baoab, Trajectory};
pub use checks::{
    check_invariance, check_martingale, check_quadratic_variation, tightness_moment,
    InvarianceReport, MartingaleReport, QvReport, TightnessReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::LatticeSumPolicy;

/// Parameters of the underdamped dynamics and its discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Friction.
    pub kappa: f64,
    /// Inverse temperature; sets the noise scale `sqrt(2 kappa / beta)`.
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Guard on a single velocity kick `|force| dt`; exceeding it aborts
    /// with advice to shrink the step.
    pub max_kick: f64,
    pub policy: LatticeSumPolicy,
}

impl DynamicsParams {
    pub fn new(kappa: f64, beta: f64, dt: f64, t_end: f64, seed: u64) -> Result<Self> {
        let p = DynamicsParams {
            kappa,
            beta,
            dt,
            t_end,
            seed,
            max_kick: 1e4,
            policy: LatticeSumPolicy::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.beta > 0.0 && self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(Error::Config(
                "dynamics requires kappa, beta, dt > 0 and t_end >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Advisory stability condition `dt < 1/(10 kappa)`; reported, not
    /// enforced, since stiff potentials dominate the real limit.
    pub fn dt_advisory_ok(&self) -> bool {
        self.dt < 0.1 / self.kappa
    }

    pub fn steps_for(&self, t: f64) -> usize {
        (t / self.dt).round().max(0.0) as usize
    }
}
