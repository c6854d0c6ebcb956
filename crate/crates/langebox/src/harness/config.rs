//! Typed run configuration, loaded from TOML with dotted-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BoxGeometry;
use crate::gibbs::{EnsembleSpec, McmcParams};
use crate::potential::{LatticeSumPolicy, PotentialConfig, PotentialSpec};
use crate::quad::QuadratureParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxSection {
    pub dim: usize,
    pub lambda: f64,
}

impl Default for BoxSection {
    fn default() -> Self {
        BoxSection { dim: 1, lambda: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSection {
    pub n: usize,
    pub beta: f64,
    pub rho_max: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n: 4,
            beta: 1.0,
            rho_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSection {
    pub n_samples: usize,
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub initial_step: f64,
    pub tune: bool,
    pub chains: usize,
}

impl Default for McmcSection {
    fn default() -> Self {
        McmcSection {
            n_samples: 2000,
            burn_in_sweeps: 400,
            thin_sweeps: 8,
            initial_step: 0.3,
            tune: true,
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeSection {
    pub target_abs_error: f64,
    pub shells: Option<u32>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            target_abs_error: 1e-10,
            shells: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsSection {
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    pub max_kick: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            kappa: 1.0,
            dt: 0.01,
            t_end: 1.0,
            max_kick: 1e4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSection {
    pub n_start: usize,
    pub max_doublings: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            n_start: 16,
            max_doublings: 6,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSection {
    pub k_max: usize,
    pub spatial_extent: f64,
    pub velocity_extent: f64,
    pub radii_cycle: Vec<f64>,
    /// The minorant scale as a multiple of beta (the continuity bound uses
    /// beta / 6).
    pub phi_scale_over_beta: f64,
    pub r_weight: f64,
    pub q_weight: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            k_max: 32,
            spatial_extent: 8.0,
            velocity_extent: 6.0,
            radii_cycle: vec![4.0, 2.0, 1.0, 0.5],
            phi_scale_over_beta: 1.0 / 6.0,
            r_weight: 1.0,
            q_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationSection {
    pub bins: usize,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        CorrelationSection { bins: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RuelleSection {
    pub lambdas: Vec<f64>,
    pub counts: Vec<usize>,
    pub allow_mcmc: bool,
}

impl Default for RuelleSection {
    fn default() -> Self {
        RuelleSection {
            lambdas: vec![2.0, 4.0, 8.0],
            counts: vec![2, 4, 8],
            allow_mcmc: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionSection {
    pub counts: Vec<usize>,
    pub insertions: usize,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            counts: vec![1, 2],
            insertions: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MartingaleSection {
    pub s: f64,
    pub t: f64,
}

impl Default for MartingaleSection {
    fn default() -> Self {
        MartingaleSection { s: 0.2, t: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TightnessSection {
    pub gaps: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub n_paths: usize,
}

impl Default for TightnessSection {
    fn default() -> Self {
        TightnessSection {
            gaps: vec![0.01, 0.02, 0.04, 0.08, 0.16, 0.32],
            lambdas: vec![2.0, 4.0],
            n_paths: 300,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NvSection {
    pub rho: f64,
    pub lambdas: Vec<f64>,
    pub counts: Vec<usize>,
    /// Half width of the centered observation window.
    pub window: f64,
    pub run_dynamics: bool,
    pub run_tightness: bool,
}

impl Default for NvSection {
    fn default() -> Self {
        NvSection {
            rho: 0.3,
            lambdas: vec![2.0, 4.0, 8.0],
            counts: vec![2, 3, 5],
            window: 1.5,
            run_dynamics: true,
            run_tightness: false,
        }
    }
}

/// Preset schedule honoring the half-integer box progression.
pub fn half_integer_schedule(rho: f64, boxes: usize, dim: usize) -> (Vec<f64>, Vec<usize>) {
    let mut lambdas = Vec::with_capacity(boxes);
    let mut counts = Vec::with_capacity(boxes);
    for n in 1..=boxes {
        let lambda = n as f64 + 0.5;
        let volume = (2.0 * lambda).powi(dim as i32);
        lambdas.push(lambda);
        counts.push(((rho * volume).round() as usize).max(1));
    }
    (lambdas, counts)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    #[serde(rename = "box")]
    pub box_section: BoxSection,
    pub potential: PotentialConfig,
    pub ensemble: EnsembleSection,
    pub mcmc: McmcSection,
    pub lattice: LatticeSection,
    pub dynamics: DynamicsSection,
    pub quadrature: QuadratureSection,
    pub metric: MetricSection,
    pub correlations: CorrelationSection,
    pub ruelle: RuelleSection,
    pub partition: PartitionSection,
    pub martingale: MartingaleSection,
    pub tightness: TightnessSection,
    pub nv: NvSection,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            name: "smoothed_lj".into(),
            params: Default::default(),
        }
    }
}

impl Config {
    pub fn geometry(&self) -> Result<BoxGeometry> {
        BoxGeometry::new(self.box_section.dim, self.box_section.lambda)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        PotentialSpec::from_config(self.box_section.dim, &self.potential)
    }

    pub fn policy(&self) -> LatticeSumPolicy {
        LatticeSumPolicy {
            shells: self.lattice.shells,
            target_abs_error: self.lattice.target_abs_error,
        }
    }

    pub fn quadrature_params(&self) -> QuadratureParams {
        QuadratureParams {
            n_start: self.quadrature.n_start,
            max_doublings: self.quadrature.max_doublings,
            rel_tol: self.quadrature.rel_tol,
            ..Default::default()
        }
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(
            self.ensemble.n,
            self.geometry()?,
            self.ensemble.beta,
            self.potential_spec()?,
            self.ensemble.rho_max,
        )
    }

    pub fn mcmc_params(&self) -> McmcParams {
        McmcParams {
            n_samples: self.mcmc.n_samples,
            burn_in_sweeps: self.mcmc.burn_in_sweeps,
            thin_sweeps: self.mcmc.thin_sweeps,
            initial_step: self.mcmc.initial_step,
            tune: self.mcmc.tune,
            chains: self.mcmc.chains,
            policy: self.policy(),
        }
    }

    pub fn dynamics_params(&self, seed: u64) -> Result<crate::dynamics::DynamicsParams> {
        let mut p = crate::dynamics::DynamicsParams::new(
            self.dynamics.kappa,
            self.ensemble.beta,
            self.dynamics.dt,
            self.dynamics.t_end,
            seed,
        )?;
        p.max_kick = self.dynamics.max_kick;
        p.policy = self.policy();
        Ok(p)
    }

    pub fn metric_params(&self) -> Result<crate::configspace::MetricParams> {
        let pot = self.potential_spec()?;
        let minorant = if pot.has_repulsion() {
            crate::potential::build_repulsion_minorant(
                |t| pot.repulsion(t),
                self.box_section.dim,
                &crate::potential::MinorantOptions::default(),
            )?
        } else {
            // fall back to a generic divergent envelope so the metric is
            // usable for non-repulsive test potentials
            crate::potential::build_repulsion_minorant(
                |t| t.powf(-2.0 * self.box_section.dim as f64),
                self.box_section.dim,
                &crate::potential::MinorantOptions::default(),
            )?
        };
        let mut params = crate::configspace::MetricParams::new(
            self.box_section.dim,
            minorant,
            self.ensemble.beta * self.metric.phi_scale_over_beta,
        );
        params.k_max = self.metric.k_max;
        params.spatial_extent = self.metric.spatial_extent;
        params.velocity_extent = self.metric.velocity_extent;
        params.radii_cycle = self.metric.radii_cycle.clone();
        params.r_weights = crate::configspace::WeightSeq::Const(self.metric.r_weight);
        params.q_weights = crate::configspace::WeightSeq::Const(self.metric.q_weight);
        Ok(params)
    }
}

/// Parse a TOML file and apply `key.path=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<(Config, toml::Value)> {
    let mut value: toml::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            text.parse()
                .map_err(|e| Error::Config(format!("config parse error: {e}")))?
        }
        None => toml::Value::Table(Default::default()),
    };
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    let config: Config = value
        .clone()
        .try_into()
        .map_err(|e| Error::Config(format!("config schema error: {e}")))?;
    Ok((config, value))
}

fn apply_override(root: &mut toml::Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{item}' must be key.path=value")))?;
    let parsed: toml::Value = if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if raw.starts_with('[') {
        format!("x = {raw}")
            .parse::<toml::Value>()
            .map_err(|e| Error::Config(format!("override list parse error: {e}")))?
            .get("x")
            .cloned()
            .unwrap()
    } else {
        toml::Value::String(raw.to_string())
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' hits a non-table")))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            break;
        }
        cursor = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

/// Short schema description printed on usage errors.
pub fn schema_help() -> String {
    let sections = [
        ("box", "dim, lambda"),
        ("potential", "name (ideal_gas | smoothed_lj | soft_core | harmonic_well), params.*"),
        ("ensemble", "n, beta, rho_max"),
        ("mcmc", "n_samples, burn_in_sweeps, thin_sweeps, initial_step, tune, chains"),
        ("lattice", "target_abs_error, shells"),
        ("dynamics", "kappa, dt, t_end, max_kick"),
        ("quadrature", "n_start, max_doublings, rel_tol"),
        ("metric", "k_max, spatial_extent, velocity_extent, radii_cycle, phi_scale_over_beta"),
        ("correlations", "bins"),
        ("ruelle", "lambdas, counts, allow_mcmc"),
        ("partition", "counts, insertions"),
        ("martingale", "s, t"),
        ("tightness", "gaps, lambdas, n_paths"),
        ("nv", "rho, lambdas, counts, window, run_dynamics, run_tightness"),
    ];
    let mut out = String::from("config sections (TOML; all optional, defaults shown by `config-dump`):\n");
    for (name, keys) in sections {
        out.push_str(&format!("  [{name}] {keys}\n"));
    }
    out.push_str("overrides: --set section.key=value\n");
    out
}
