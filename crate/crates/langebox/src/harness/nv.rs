//! Growing-box experiment: fixed density, increasing boxes, and a
//! stabilization table for window observables. Every stage communicates
//! through files, so the orchestrated run reproduces chained standalone
//! commands bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::configspace::pairing_windowed;
use crate::dynamics::{check_martingale, run_trajectory, tightness_moment};
use crate::error::{Error, Result};
use crate::geom::{BoxGeometry, Window};
use crate::gibbs::{
    estimate_correlation, sample_canonical, CorrelationEstimate, EnsembleSpec, GibbsEnsemble,
};
use crate::harness::config::Config;
use crate::harness::report::{fmt_f64, write_csv, write_json};
use crate::harness::snapshot::{
    load_snapshot, save_snapshot, Snapshot, SnapshotHeader, SnapshotPayload,
};
use crate::observables::{bump_observable, CylinderObservable, OuterFn, VelocityProfile};
use crate::rng::stage_seed;
use crate::stats;

/// A fixed-density box schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NvSchedule {
    pub rho: f64,
    pub lambdas: Vec<f64>,
    pub counts: Vec<usize>,
}

impl NvSchedule {
    pub fn validate(&self, rho_max: f64, dim: usize) -> Result<()> {
        if self.lambdas.len() != self.counts.len() || self.lambdas.is_empty() {
            return Err(Error::Config("schedule needs matching lambdas and counts".into()));
        }
        if !self.lambdas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("schedule lambdas must increase strictly".into()));
        }
        for (&l, &n) in self.lambdas.iter().zip(&self.counts) {
            let rho = n as f64 / (2.0 * l).powi(dim as i32);
            if rho > rho_max {
                return Err(Error::DensityExceedsRhoMax { rho, rho_max });
            }
        }
        let last = *self.counts.last().unwrap() as f64
            / (2.0 * self.lambdas.last().unwrap()).powi(dim as i32);
        let dev = (last - self.rho).abs() / self.rho;
        if dev >= 0.05 {
            return Err(Error::Config(format!(
                "final schedule density {last:.4} deviates {:.1}% from target {}",
                100.0 * dev,
                self.rho
            )));
        }
        Ok(())
    }
}

/// Sample the ensemble of a spec and persist it. Shared by `sample-gibbs`
/// and the orchestrated pipeline.
pub fn stage_sample(cfg: &Config, spec: &EnsembleSpec, out: &Path, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let ensemble = sample_canonical(spec, &cfg.mcmc_params(), seed)?;
    let path = out.join("ensemble.snap");
    save_snapshot(
        &path,
        &Snapshot {
            header: SnapshotHeader {
                dim: spec.geometry.dim(),
                lambda: spec.geometry.half_side(),
                n_particles: spec.n_particles,
                beta: spec.beta,
                kappa: None,
                dt: None,
                seed,
                potential: spec.pot.to_config(),
            },
            payload: SnapshotPayload::Ensemble(ensemble),
        },
    )?;
    Ok(path)
}

pub fn load_ensemble(path: &Path) -> Result<(SnapshotHeader, GibbsEnsemble)> {
    let snap = load_snapshot(path)?;
    match snap.payload {
        SnapshotPayload::Ensemble(e) => Ok((snap.header, e)),
        _ => Err(Error::SnapshotMalformed(
            "expected an ensemble snapshot".into(),
        )),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationArtifacts {
    pub order1: CorrelationEstimate,
    pub order2: CorrelationEstimate,
}

/// Correlation histograms from a persisted ensemble. Shared by
/// `estimate-correlations` and the pipeline.
pub fn stage_correlations(cfg: &Config, out: &Path) -> Result<CorrelationArtifacts> {
    let (header, ensemble) = load_ensemble(&out.join("ensemble.snap"))?;
    let geometry = BoxGeometry::new(header.dim, header.lambda)?;
    let bins = cfg.correlations.bins;
    let order1 = estimate_correlation(&ensemble, &geometry, 1, bins)?;
    let order2 = estimate_correlation(&ensemble, &geometry, 2, bins)?;
    let artifacts = CorrelationArtifacts { order1, order2 };
    write_json(&out.join("correlations.json"), &artifacts)?;
    let rows: Vec<Vec<String>> = artifacts
        .order2
        .points
        .iter()
        .zip(artifacts.order2.values.iter().zip(&artifacts.order2.errors))
        .map(|(p, (v, e))| vec![fmt_f64(p[0]), fmt_f64(*v), fmt_f64(*e)])
        .collect();
    write_csv(&out.join("pair_correlation.csv"), &["separation", "k2", "se"], &rows)?;
    Ok(artifacts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsArtifacts {
    /// Window pairing of a fixed bump observable at the end time, ensemble
    /// mean and standard error, normalized per density.
    pub window_pairing_mean: f64,
    pub window_pairing_se: f64,
    /// Martingale increment residual in SE units.
    pub martingale_se_units: f64,
    pub martingale_pass: bool,
}

/// Evolve a persisted ensemble, record window observables at the horizon and
/// run the martingale residual; writes one trajectory snapshot for format
/// demonstration. Shared by `run-dynamics` and the pipeline.
pub fn stage_dynamics(
    cfg: &Config,
    out: &Path,
    seed: u64,
    window: &Window,
    rho_n: f64,
) -> Result<DynamicsArtifacts> {
    let (header, ensemble) = load_ensemble(&out.join("ensemble.snap"))?;
    let geometry = BoxGeometry::new(header.dim, header.lambda)?;
    let pot = crate::potential::PotentialSpec::from_config(header.dim, &header.potential)?;
    let params = cfg.dynamics_params(seed)?;

    // fixed window bump observable, normalized by the schedule density
    let radius = 0.45 * (window.hi[0] - window.lo[0]);
    let probe = bump_observable(
        header.dim,
        &vec![0.0; header.dim],
        radius,
        VelocityProfile::One,
    )?;

    use rayon::prelude::*;
    let finals: Vec<Result<f64>> = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(chain, sample)| -> Result<f64> {
            let t = run_trajectory(
                sample,
                &pot,
                &geometry,
                &params,
                &[params.t_end],
                chain as u64,
            )?;
            Ok(pairing_windowed(&t.states[0], window, |x, v| probe.value(x, v)) / rho_n)
        })
        .collect();
    let mut values = Vec::with_capacity(finals.len());
    for f in finals {
        values.push(f?);
    }
    let (mean, se) = stats::mean_se(&values);

    // one demonstration trajectory in the snapshot format
    let demo = run_trajectory(
        &ensemble.samples[0],
        &pot,
        &geometry,
        &params,
        &[0.0, 0.5 * params.t_end, params.t_end],
        0,
    )?;
    save_snapshot(
        &out.join("trajectory.snap"),
        &Snapshot {
            header: SnapshotHeader {
                dim: header.dim,
                lambda: header.lambda,
                n_particles: header.n_particles,
                beta: header.beta,
                kappa: Some(params.kappa),
                dt: Some(params.dt),
                seed,
                potential: header.potential.clone(),
            },
            payload: SnapshotPayload::Trajectory(demo),
        },
    )?;

    // martingale residual with a bounded cylinder observable in the window
    let obs = CylinderObservable {
        outer: OuterFn::Tanh {
            weights: vec![0.7],
            intercept: 0.0,
            amplitude: 1.0,
        },
        inner: vec![bump_observable(
            header.dim,
            &vec![0.0; header.dim],
            radius,
            VelocityProfile::Coord {
                axis: 0,
                scale: 2.0,
            },
        )?],
    };
    let sub = GibbsEnsemble {
        samples: ensemble
            .samples
            .iter()
            .take(ensemble.samples.len().min(400))
            .cloned()
            .collect(),
        meta: ensemble.meta.clone(),
    };
    let mart = check_martingale(
        &sub,
        &obs,
        &pot,
        &geometry,
        &params,
        0.5 * params.t_end,
        params.t_end,
    )?;

    let artifacts = DynamicsArtifacts {
        window_pairing_mean: mean,
        window_pairing_se: se,
        martingale_se_units: mart.increment_se_units,
        martingale_pass: mart.pass,
    };
    write_json(&out.join("dynamics.json"), &artifacts)?;
    Ok(artifacts)
}

/// Pair-correlation profile on a fixed absolute separation grid, normalized
/// to the pair density so profiles are comparable across boxes:
/// `g(s) = k2(s) V^2 / (N (N-1))`.
pub fn windowed_pair_profile(
    ensemble: &GibbsEnsemble,
    geometry: &BoxGeometry,
    half_width: f64,
    bins: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = geometry.dim();
    let n_samples = ensemble.samples.len();
    let n_batches = 32.min(n_samples.max(1));
    let bin_w = 2.0 * half_width / bins as f64;
    let mut batch_counts = vec![vec![0.0f64; bins]; n_batches];
    for (s_idx, sample) in ensemble.samples.iter().enumerate() {
        let batch = (s_idx * n_batches / n_samples.max(1)).min(n_batches - 1);
        let n = sample.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let delta = geometry.min_image_delta(sample.position(i), sample.position(j));
                // profile along the first axis within the window band
                if (1..d).any(|k| delta[k].abs() > half_width) {
                    continue;
                }
                let s = delta[0];
                if s.abs() >= half_width {
                    continue;
                }
                let b = (((s + half_width) / bin_w) as usize).min(bins - 1);
                batch_counts[batch][b] += 1.0;
            }
        }
    }
    let n = ensemble.samples.first().map(|s| s.len()).unwrap_or(0);
    let pair_count = (n * n.saturating_sub(1)) as f64;
    let volume = geometry.volume();
    let band = bin_w * (2.0 * half_width).powi(d as i32 - 1);
    let norm = volume * volume / (pair_count * n_samples as f64 * band * volume);
    let batch_samples = (n_samples as f64 / n_batches as f64).max(1.0);
    let batch_norm = norm * n_samples as f64 / batch_samples;
    let mut centers = Vec::with_capacity(bins);
    let mut values = Vec::with_capacity(bins);
    let mut errors = Vec::with_capacity(bins);
    for b in 0..bins {
        centers.push(-half_width + (b as f64 + 0.5) * bin_w);
        let total: f64 = batch_counts.iter().map(|c| c[b]).sum();
        values.push(total * norm);
        let batch_values: Vec<f64> = batch_counts.iter().map(|c| c[b] * batch_norm).collect();
        errors.push((stats::variance(&batch_values) / n_batches as f64).sqrt());
    }
    (centers, values, errors)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NvBoxReport {
    pub lambda: f64,
    pub n_particles: usize,
    pub rho_n: f64,
    /// Window count density over the schedule density; one for every box in
    /// a translation-invariant ensemble.
    pub density_ratio: f64,
    pub density_ratio_se: f64,
    pub pair_profile: Vec<f64>,
    pub pair_profile_se: Vec<f64>,
    pub dynamics: Option<DynamicsArtifacts>,
    pub tightness_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizationRow {
    pub observable: String,
    pub deltas: Vec<f64>,
    pub delta_ses: Vec<f64>,
    pub decreasing_within_noise: bool,
    pub final_within_3se: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NvReport {
    pub schedule: NvSchedule,
    pub boxes: Vec<NvBoxReport>,
    pub stabilization: Vec<StabilizationRow>,
    pub martingale_all_pass: bool,
    pub pass: bool,
}

/// Run the growing-box experiment under a config, writing per-box artifacts
/// into `out/box_<i>/` and the stabilization table at the top level.
pub fn run_nv_limit(cfg: &Config, out_dir: &Path, seed: u64) -> Result<NvReport> {
    let dim = cfg.box_section.dim;
    let schedule = NvSchedule {
        rho: cfg.nv.rho,
        lambdas: cfg.nv.lambdas.clone(),
        counts: cfg.nv.counts.clone(),
    };
    schedule.validate(cfg.ensemble.rho_max, dim)?;
    let window = Window::centered(dim, cfg.nv.window);
    let smallest = BoxGeometry::new(dim, schedule.lambdas[0])?;
    if !window.fits_in(&smallest) {
        return Err(Error::Config(
            "observation window must fit inside the smallest box".into(),
        ));
    }
    let pot_cfg = cfg.potential.clone();

    let mut boxes = Vec::new();
    for (i, (&lambda, &count)) in schedule.lambdas.iter().zip(&schedule.counts).enumerate() {
        let box_dir = out_dir.join(format!("box_{i}"));
        let geometry = BoxGeometry::new(dim, lambda)?;
        let pot = crate::potential::PotentialSpec::from_config(dim, &pot_cfg)?;
        let spec = EnsembleSpec::new(count, geometry, cfg.ensemble.beta, pot, cfg.ensemble.rho_max)?;
        let rho_n = spec.density();
        let sample_seed = stage_seed(seed, "gibbs", i as u64);
        stage_sample(cfg, &spec, &box_dir, sample_seed)?;
        let (_, ensemble) = load_ensemble(&box_dir.join("ensemble.snap"))?;

        // window density ratio
        let counts: Vec<f64> = ensemble
            .samples
            .iter()
            .map(|s| {
                s.points().filter(|(x, _)| window.contains(x)).count() as f64
                    / (window.volume() * rho_n)
            })
            .collect();
        let (density_ratio, density_ratio_se) = stats::batch_means_se(&counts, 32);

        stage_correlations(cfg, &box_dir)?;
        let (_, profile, profile_se) =
            windowed_pair_profile(&ensemble, &geometry, cfg.nv.window, cfg.correlations.bins.min(32));

        let dynamics = if cfg.nv.run_dynamics {
            Some(stage_dynamics(
                cfg,
                &box_dir,
                stage_seed(seed, "dynamics", i as u64),
                &window,
                rho_n,
            )?)
        } else {
            None
        };

        let tightness_slope = if cfg.nv.run_tightness {
            let params = {
                let mut p = cfg.dynamics_params(stage_seed(seed, "tightness", i as u64))?;
                p.t_end = cfg.tightness.gaps.iter().fold(0.0f64, |m, &g| m.max(g));
                p
            };
            let metric = cfg.metric_params()?;
            let pairs: Vec<(f64, f64)> = cfg.tightness.gaps.iter().map(|&g| (0.0, g)).collect();
            let sub = GibbsEnsemble {
                samples: ensemble
                    .samples
                    .iter()
                    .take(cfg.tightness.n_paths)
                    .cloned()
                    .collect(),
                meta: ensemble.meta.clone(),
            };
            let pot_t = crate::potential::PotentialSpec::from_config(dim, &pot_cfg)?;
            Some(tightness_moment(&sub, &pot_t, &geometry, &params, &metric, &pairs)?.slope)
        } else {
            None
        };

        boxes.push(NvBoxReport {
            lambda,
            n_particles: count,
            rho_n,
            density_ratio,
            density_ratio_se,
            pair_profile: profile,
            pair_profile_se: profile_se,
            dynamics,
            tightness_slope,
        });
    }

    // stabilization table
    let mut stabilization = Vec::new();
    let scalar_rows: Vec<(&str, Vec<(f64, f64)>)> = {
        let mut rows = vec![(
            "window_density_ratio",
            boxes
                .iter()
                .map(|b| (b.density_ratio, b.density_ratio_se))
                .collect::<Vec<_>>(),
        )];
        if cfg.nv.run_dynamics {
            rows.push((
                "window_pairing_t_end",
                boxes
                    .iter()
                    .map(|b| {
                        let d = b.dynamics.as_ref().unwrap();
                        (d.window_pairing_mean, d.window_pairing_se)
                    })
                    .collect(),
            ));
        }
        rows
    };
    for (name, series) in scalar_rows {
        stabilization.push(stabilization_row(name, &series));
    }
    stabilization.push(profile_stabilization_row(&boxes));

    let martingale_all_pass = boxes
        .iter()
        .all(|b| b.dynamics.as_ref().map(|d| d.martingale_pass).unwrap_or(true));
    let pass = martingale_all_pass
        && stabilization
            .iter()
            .all(|row| row.decreasing_within_noise && row.final_within_3se);

    let report = NvReport {
        schedule,
        boxes,
        stabilization,
        martingale_all_pass,
        pass,
    };
    write_json(&out_dir.join("nv_report.json"), &report)?;
    let rows: Vec<Vec<String>> = report
        .stabilization
        .iter()
        .flat_map(|row| {
            row.deltas.iter().zip(&row.delta_ses).enumerate().map(
                move |(k, (d, se))| {
                    vec![
                        row.observable.clone(),
                        format!("{}", k + 1),
                        fmt_f64(*d),
                        fmt_f64(*se),
                    ]
                },
            )
        })
        .collect();
    write_csv(
        &out_dir.join("stabilization.csv"),
        &["observable", "step", "delta", "se"],
        &rows,
    )?;
    Ok(report)
}

fn stabilization_row(name: &str, series: &[(f64, f64)]) -> StabilizationRow {
    let mut deltas = Vec::new();
    let mut ses = Vec::new();
    for w in series.windows(2) {
        deltas.push((w[1].0 - w[0].0).abs());
        ses.push((w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt());
    }
    finish_row(name, deltas, ses)
}

fn profile_stabilization_row(boxes: &[NvBoxReport]) -> StabilizationRow {
    let mut deltas = Vec::new();
    let mut ses = Vec::new();
    for w in boxes.windows(2) {
        let (mut sup, mut sup_se) = (0.0f64, 0.0f64);
        for k in 0..w[0].pair_profile.len().min(w[1].pair_profile.len()) {
            let d = (w[1].pair_profile[k] - w[0].pair_profile[k]).abs();
            if d > sup {
                sup = d;
                sup_se = (w[0].pair_profile_se[k].powi(2) + w[1].pair_profile_se[k].powi(2)).sqrt();
            }
        }
        deltas.push(sup);
        ses.push(sup_se);
    }
    finish_row("pair_profile_sup", deltas, ses)
}

fn finish_row(name: &str, deltas: Vec<f64>, ses: Vec<f64>) -> StabilizationRow {
    // monotone decrease, allowing the measurement noise of both deltas
    let decreasing_within_noise = deltas
        .windows(2)
        .zip(ses.windows(2))
        .all(|(d, s)| d[1] <= d[0] + 2.0 * (s[0] + s[1]));
    let final_within_3se = match (deltas.last(), ses.last()) {
        (Some(&d), Some(&s)) => d <= 3.0 * s.max(1e-12),
        _ => true,
    };
    StabilizationRow {
        observable: name.to_string(),
        deltas,
        delta_ses: ses,
        decreasing_within_noise,
        final_within_3se,
    }
}
