//! Canonical Gibbs ensembles on the periodic box: Metropolis sampling, an
//! exact small-system quadrature oracle, correlation-function estimation and
//! the uniform bounds they satisfy.

pub mod correlation;
pub mod mcmc;
pub mod oracle;

pub use correlation::{
    check_ruelle, classify_case, estimate_correlation, partition_ratio_check, CaseParams,
    PartitionRatioReport, RuelleGroup, RuelleReport, SuperstabilityCase,
};
pub use mcmc::{insertion_ratio_estimate, sample_canonical, McmcParams};
pub use oracle::QuadratureOracle;

use serde::{Deserialize, Serialize};

use crate::configspace::MarkedConfiguration;
use crate::error::{Error, Result};
use crate::geom::BoxGeometry;
use crate::potential::PotentialSpec;

/// A canonical ensemble: fixed particle count, box, inverse temperature and
/// pair potential, with a declared density ceiling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_particles: usize,
    pub geometry: BoxGeometry,
    pub beta: f64,
    pub pot: PotentialSpec,
    pub rho_max: f64,
}

impl EnsembleSpec {
    pub fn new(
        n_particles: usize,
        geometry: BoxGeometry,
        beta: f64,
        pot: PotentialSpec,
        rho_max: f64,
    ) -> Result<Self> {
        let spec = EnsembleSpec {
            n_particles,
            geometry,
            beta,
            pot,
            rho_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn density(&self) -> f64 {
        self.n_particles as f64 / self.geometry.volume()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config("beta must be positive".into()));
        }
        if self.pot.dim() != self.geometry.dim() {
            return Err(Error::Config(
                "potential and box dimensions disagree".into(),
            ));
        }
        let rho = self.density();
        if rho > self.rho_max {
            return Err(Error::DensityExceedsRhoMax {
                rho,
                rho_max: self.rho_max,
            });
        }
        Ok(())
    }
}

/// Sampler provenance attached to an ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerMeta {
    pub seed: u64,
    pub chains: usize,
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub acceptance: f64,
    pub step: f64,
    pub iat_energy_sweeps: f64,
}

/// Samples from a canonical ensemble with their sampling metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsEnsemble {
    pub samples: Vec<MarkedConfiguration>,
    pub meta: SamplerMeta,
}

/// Estimation method tag on correlation estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMethod {
    Mcmc,
    Quadrature,
}

/// A gridded estimate of an n-point correlation function.
///
/// For `order == 2` the estimate is usually separation-reduced: evaluation
/// points are separation vectors and the value at `(x, y)` is the value at
/// `x - y` wrapped into the box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub order: usize,
    pub separation_reduced: bool,
    /// Evaluation points: positions (order 1), separations (reduced order 2)
    /// or concatenated tuples.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub method: EstimateMethod,
    /// Bin volume for histogram estimates; zero for pointwise quadrature.
    pub bin_volume: f64,
}

impl CorrelationEstimate {
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Numeric integral of the estimate against its bins, available for
    /// histogram estimates.
    pub fn bin_integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_volume
    }
}
