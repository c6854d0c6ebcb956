//! Statistical verification of the dynamics against the structures it must
//! preserve: the canonical ensemble, the martingale property of compensated
//! cylinder observables, the quadratic variation of K-transform martingales,
//! and the third-moment continuity bound in the configuration metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{dist_full, MarkedConfiguration, MetricParams};
use crate::dynamics::baoab::evolve;
use crate::dynamics::DynamicsParams;
use crate::error::Result;
use crate::geom::BoxGeometry;
use crate::gibbs::GibbsEnsemble;
use crate::observables::{
    apply_generator_periodic, grad_v_k_transform, CylinderObservable, OuterFn, TestFunction,
};
use crate::potential::energy::periodic_energy;
use crate::potential::PotentialSpec;
use crate::stats;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableCheck {
    pub name: String,
    pub mean_initial: f64,
    pub mean_final: f64,
    /// Paired mean difference in units of its standard error.
    pub drift_se_units: f64,
    pub ks_statistic: f64,
    pub ks_critical_1pct: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub t_end: f64,
    pub observables: Vec<ObservableCheck>,
    pub pass: bool,
}

/// Evolve every ensemble member to `t_end` and compare observable
/// distributions before and after: paired means within 3 SE and two-sample
/// Kolmogorov-Smirnov below the 1% critical value.
pub fn check_invariance(
    ensemble: &GibbsEnsemble,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    params: &DynamicsParams,
    extra: &[(String, CylinderObservable)],
) -> Result<InvarianceReport> {
    let total_steps = params.steps_for(params.t_end);
    let n_obs = 2 + extra.len();

    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(chain, sample)| -> Result<(Vec<f64>, Vec<f64>)> {
            let description = |g: &MarkedConfiguration| -> Result<Vec<f64>> {
                let mut row = Vec::with_capacity(n_obs);
                row.push(periodic_energy(
                    g.positions(),
                    pot,
                    geometry,
                    &params.policy,
                )?);
                let speed2: f64 = g
                    .points()
                    .map(|(_, v)| v.iter().map(|c| c * c).sum::<f64>())
                    .sum();
                row.push(speed2);
                for (_, obs) in extra {
                    row.push(obs.value(g));
                }
                Ok(row)
            };
            let initial = description(sample)?;
            let mut last: Option<MarkedConfiguration> = None;
            evolve(sample, pot, geometry, params, chain as u64, total_steps, |step, pos, vel| {
                if step == total_steps {
                    last = Some(MarkedConfiguration::from_parts_unchecked(
                        pos.clone(),
                        vel.clone(),
                    ));
                }
            })?;
            let final_row = description(&last.expect("final state visited"))?;
            Ok((initial, final_row))
        })
        .collect();

    let mut initial_cols = vec![Vec::with_capacity(rows.len()); n_obs];
    let mut final_cols = vec![Vec::with_capacity(rows.len()); n_obs];
    for r in rows {
        let (i, f) = r?;
        for (k, v) in i.into_iter().enumerate() {
            initial_cols[k].push(v);
        }
        for (k, v) in f.into_iter().enumerate() {
            final_cols[k].push(v);
        }
    }

    let mut names = vec!["energy".to_string(), "speed_squared".to_string()];
    names.extend(extra.iter().map(|(n, _)| n.clone()));

    let mut observables = Vec::with_capacity(n_obs);
    let mut all_pass = true;
    for k in 0..n_obs {
        let a = &initial_cols[k];
        let b = &final_cols[k];
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let (dmean, dse) = stats::mean_se(&diffs);
        let drift_se_units = if dse > 0.0 { dmean.abs() / dse } else { 0.0 };
        let ks = stats::ks_statistic(a, b);
        let crit = stats::ks_critical(a.len(), b.len(), 0.01);
        let pass = drift_se_units < 3.0 && ks < crit;
        all_pass &= pass;
        observables.push(ObservableCheck {
            name: names[k].clone(),
            mean_initial: stats::mean(a),
            mean_final: stats::mean(b),
            drift_se_units,
            ks_statistic: ks,
            ks_critical_1pct: crit,
            pass,
        });
    }
    Ok(InvarianceReport {
        t_end: params.t_end,
        observables,
        pass: all_pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub s: f64,
    pub t: f64,
    /// `E[M_t - M_s]` in standard-error units.
    pub increment_se_units: f64,
    /// `E[(M_t - M_s) G(gamma_s)]` in SE units for the canonical G battery.
    pub correlator_se_units: Vec<f64>,
    pub pass: bool,
}

/// Check the compensated-observable martingale property between times `s`
/// and `t`: the compensator integral is the trapezoid of the periodic
/// generator along the step grid, and the increment must be centered, both
/// unconditionally and against bounded functions of the time-`s` state.
pub fn check_martingale(
    ensemble: &GibbsEnsemble,
    obs: &CylinderObservable,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    params: &DynamicsParams,
    s: f64,
    t: f64,
) -> Result<MartingaleReport> {
    assert!(s < t && t <= params.t_end + 1e-12);
    let total_steps = params.steps_for(t);
    let s_step = params.steps_for(s);
    let probe = &obs.inner[0];

    let rows: Vec<Result<(f64, f64, [f64; 3])>> = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(chain, sample)| -> Result<(f64, f64, [f64; 3])> {
            let mut f0 = 0.0;
            let mut compensator = 0.0;
            let mut prev_lf = 0.0;
            let mut m_s = 0.0;
            let mut m_t = 0.0;
            let mut g_battery = [0.0; 3];
            let mut inner: Result<()> = Ok(());
            evolve(sample, pot, geometry, params, chain as u64, total_steps, |step, pos, vel| {
                if inner.is_err() {
                    return;
                }
                let state = MarkedConfiguration::from_parts_unchecked(pos.clone(), vel.clone());
                let lf = match apply_generator_periodic(
                    obs,
                    &state,
                    pot,
                    geometry,
                    &params.policy,
                    params.kappa,
                    params.beta,
                ) {
                    Ok(v) => v,
                    Err(e) => {
                        inner = Err(e);
                        return;
                    }
                };
                let f = obs.value(&state);
                if step == 0 {
                    f0 = f;
                } else {
                    compensator += 0.5 * params.dt * (prev_lf + lf);
                }
                prev_lf = lf;
                if step == s_step {
                    m_s = f - f0 - compensator;
                    let pairing = crate::configspace::pairing(&state, |x, v| probe.value(x, v));
                    g_battery = [1.0, pairing.tanh(), pairing.cos()];
                }
                if step == total_steps {
                    m_t = f - f0 - compensator;
                }
            })?;
            inner?;
            Ok((m_s, m_t, g_battery))
        })
        .collect();

    let mut increments = Vec::with_capacity(ensemble.samples.len());
    let mut weighted: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for r in rows {
        let (m_s, m_t, g) = r?;
        let inc = m_t - m_s;
        increments.push(inc);
        for k in 0..3 {
            weighted[k].push(inc * g[k]);
        }
    }
    let (mean, se) = stats::mean_se(&increments);
    let increment_se_units = if se > 0.0 { mean.abs() / se } else { 0.0 };
    let correlator_se_units: Vec<f64> = weighted
        .iter()
        .map(|w| {
            let (m, e) = stats::mean_se(w);
            if e > 0.0 {
                m.abs() / e
            } else {
                0.0
            }
        })
        .collect();
    let pass =
        increment_se_units < 3.0 && correlator_se_units.iter().all(|&u| u < 3.0);
    Ok(MartingaleReport {
        s,
        t,
        increment_se_units,
        correlator_se_units,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QvReport {
    pub realized_mean: f64,
    pub predicted_mean: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub pass: bool,
}

/// Realized versus predicted quadratic variation of the K-transform
/// martingale of a one-point observable: the per-step compensated increments
/// squared against the integrated diffusion coefficient
/// `(2 kappa / beta) |grad_v Kf|^2`.
pub fn check_quadratic_variation(
    ensemble: &GibbsEnsemble,
    f: &TestFunction,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    params: &DynamicsParams,
    t: f64,
) -> Result<QvReport> {
    let total_steps = params.steps_for(t);
    let obs = CylinderObservable {
        outer: OuterFn::Linear {
            weights: vec![1.0],
            intercept: 0.0,
        },
        inner: vec![f.clone()],
    };

    let rows: Vec<Result<(f64, f64)>> = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(chain, sample)| -> Result<(f64, f64)> {
            let mut realized = 0.0;
            let mut predicted = 0.0;
            let mut prev_f = 0.0;
            let mut prev_lf = 0.0;
            let mut prev_diff = 0.0;
            let mut inner: Result<()> = Ok(());
            evolve(sample, pot, geometry, params, chain as u64, total_steps, |step, pos, vel| {
                if inner.is_err() {
                    return;
                }
                let state = MarkedConfiguration::from_parts_unchecked(pos.clone(), vel.clone());
                let lf = match apply_generator_periodic(
                    &obs,
                    &state,
                    pot,
                    geometry,
                    &params.policy,
                    params.kappa,
                    params.beta,
                ) {
                    Ok(v) => v,
                    Err(e) => {
                        inner = Err(e);
                        return;
                    }
                };
                let fval = obs.value(&state);
                let grads = grad_v_k_transform(f, &state);
                let diff = (2.0 * params.kappa / params.beta)
                    * grads.iter().map(|g| g * g).sum::<f64>();
                if step > 0 {
                    let dm = fval - prev_f - 0.5 * params.dt * (prev_lf + lf);
                    realized += dm * dm;
                    predicted += 0.5 * params.dt * (prev_diff + diff);
                }
                prev_f = fval;
                prev_lf = lf;
                prev_diff = diff;
            })?;
            inner?;
            Ok((realized, predicted))
        })
        .collect();

    let mut realized = Vec::with_capacity(ensemble.samples.len());
    let mut predicted = Vec::with_capacity(ensemble.samples.len());
    for r in rows {
        let (re, pr) = r?;
        realized.push(re);
        predicted.push(pr);
    }
    let (rm, rse) = stats::mean_se(&realized);
    let (pm, pse) = stats::mean_se(&predicted);
    if pm.abs() < 1e-12 {
        // no diffusion part: realized must be discretization noise
        let pass = rm.abs() < 1e-8;
        return Ok(QvReport {
            realized_mean: rm,
            predicted_mean: pm,
            ratio: if rm == 0.0 && pm == 0.0 { 1.0 } else { f64::NAN },
            ratio_se: 0.0,
            pass,
        });
    }
    let ratio = rm / pm;
    let ratio_se = ratio * ((rse / rm).powi(2) + (pse / pm).powi(2)).sqrt().abs();
    let pass = (ratio - 1.0).abs() <= 0.05 + 3.0 * ratio_se;
    Ok(QvReport {
        realized_mean: rm,
        predicted_mean: pm,
        ratio,
        ratio_se,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessEntry {
    pub gap: f64,
    pub moment: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessReport {
    pub entries: Vec<TightnessEntry>,
    /// Fitted log-log slope of the third moment against the time gap.
    pub slope: f64,
    /// Fitted prefactor.
    pub prefactor: f64,
    pub pass: bool,
}

/// Third moment of the completed-metric displacement over time gaps:
/// `E[ d(gamma_t, gamma_s)^3 ]` fitted as `C gap^slope`; the continuity
/// bound predicts slope `3/2`, and the check passes at `slope >= 1.4`.
pub fn tightness_moment(
    ensemble: &GibbsEnsemble,
    pot: &PotentialSpec,
    geometry: &BoxGeometry,
    params: &DynamicsParams,
    metric: &MetricParams,
    time_pairs: &[(f64, f64)],
) -> Result<TightnessReport> {
    // collect every step index we must snapshot
    let mut obs_steps: Vec<usize> = time_pairs
        .iter()
        .flat_map(|&(s, t)| [params.steps_for(s), params.steps_for(t)])
        .collect();
    obs_steps.sort_unstable();
    obs_steps.dedup();
    let total_steps = *obs_steps.last().unwrap_or(&0);

    let rows: Vec<Result<Vec<f64>>> = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(chain, sample)| -> Result<Vec<f64>> {
            let mut snapshots: Vec<MarkedConfiguration> = Vec::with_capacity(obs_steps.len());
            evolve(sample, pot, geometry, params, chain as u64, total_steps, |step, pos, vel| {
                if obs_steps.binary_search(&step).is_ok() {
                    snapshots.push(MarkedConfiguration::from_parts_unchecked(
                        pos.clone(),
                        vel.clone(),
                    ));
                }
            })?;
            let state_at = |step: usize| -> &MarkedConfiguration {
                let idx = obs_steps.binary_search(&step).expect("recorded step");
                &snapshots[idx]
            };
            Ok(time_pairs
                .iter()
                .map(|&(s, t)| {
                    let d = dist_full(
                        state_at(params.steps_for(s)),
                        state_at(params.steps_for(t)),
                        metric,
                    );
                    d * d * d
                })
                .collect())
        })
        .collect();

    let mut per_pair: Vec<Vec<f64>> = vec![Vec::new(); time_pairs.len()];
    for r in rows {
        for (k, v) in r?.into_iter().enumerate() {
            per_pair[k].push(v);
        }
    }
    let mut entries = Vec::with_capacity(time_pairs.len());
    for (k, &(s, t)) in time_pairs.iter().enumerate() {
        let (m, se) = stats::mean_se(&per_pair[k]);
        entries.push(TightnessEntry {
            gap: t - s,
            moment: m,
            se,
        });
    }
    let xs: Vec<f64> = entries.iter().map(|e| e.gap.ln()).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.moment.max(1e-300).ln()).collect();
    let (slope, intercept) = stats::linear_fit(&xs, &ys);
    let pass = slope >= 1.4;
    Ok(TightnessReport {
        entries,
        slope,
        prefactor: intercept.exp(),
        pass,
    })
}
