//! Command-line pipelines. Exit codes: 0 all checks passed, 2 a numeric
//! check failed, 1 usage or configuration error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::configspace::MetricParams;
use crate::dynamics::{check_invariance, tightness_moment};
use crate::error::{Error, Result};
use crate::geom::{BoxGeometry, Window};
use crate::gibbs::{
    check_ruelle, estimate_correlation, partition_ratio_check, sample_canonical, EnsembleSpec,
    GibbsEnsemble, QuadratureOracle, RuelleGroup,
};
use crate::harness::config::{load_config, schema_help, Config};
use crate::harness::nv::{run_nv_limit, stage_correlations, stage_dynamics, stage_sample};
use crate::harness::report::{fmt_f64, write_csv, write_json, ExperimentManifest};
use crate::observables::{bump_observable, CylinderObservable, OuterFn, VelocityProfile};
use crate::potential::{build_repulsion_minorant, check_uniform_bounds, MinorantOptions};
use crate::rng::stage_seed;

#[derive(Parser, Debug)]
#[command(
    name = "langebox",
    about = "Canonical Gibbs ensembles and kinetic Langevin dynamics on periodic boxes",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Dotted-path overrides, e.g. --set ensemble.n=6.
    #[arg(long = "set", global = true)]
    pub overrides: Vec<String>,

    /// Output directory (also LANGEBOX_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Root seed for all stages.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (also LANGEBOX_THREADS); 0 keeps the default.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Force serial execution.
    #[arg(long, global = true, default_value_t = false)]
    pub deterministic: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a canonical ensemble and persist it.
    SampleGibbs,
    /// Evolve a persisted ensemble under the Langevin integrator.
    RunDynamics,
    /// Correlation histograms of a persisted ensemble.
    EstimateCorrelations,
    /// Empirical uniform correlation bounds across a box sweep.
    CheckRuelle,
    /// Partition-ratio sweep by quadrature and particle insertion.
    CheckPartitionRatio,
    /// Martingale residuals of compensated cylinder observables.
    CheckMartingale,
    /// Invariance of the sampled ensemble under the integrator.
    CheckInvariance,
    /// Third-moment continuity bound in the configuration metric.
    CheckTightness,
    /// Growing-box stabilization experiment.
    NvLimit,
    /// Verify the declared potential regularity numerically.
    VerifyPotential,
    /// Print the resolved configuration.
    ConfigDump,
}

/// Entry point used by the binary and by tests: parse, run, map to an exit
/// code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{e}");
            eprintln!("{}", schema_help());
            return 1;
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                eprintln!("{}", schema_help());
            }
            1
        }
    }
}

/// Run a parsed command; `Ok(true)` means all checks passed.
pub fn run(cli: Cli) -> Result<bool> {
    let threads = std::env::var("LANGEBOX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(cli.threads);
    let threads = if cli.deterministic { 1 } else { threads };
    if threads > 0 {
        // ignore failure when a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var("LANGEBOX_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;

    let (config, raw) = load_config(cli.config.as_deref(), &cli.overrides)?;
    let mut manifest = ExperimentManifest::new(
        &format!("{:?}", cli.command),
        cli.seed,
        cli.deterministic,
        threads,
        raw,
    );

    let pass = match cli.command {
        Command::SampleGibbs => {
            let spec = config.ensemble_spec()?;
            let path = stage_sample(&config, &spec, &out_dir, stage_seed(cli.seed, "gibbs", 0))?;
            manifest.record("ensemble", &path);
            println!("sampled {} configurations -> {}", config.mcmc.n_samples, path.display());
            true
        }
        Command::RunDynamics => {
            let window = Window::centered(config.box_section.dim, config.nv.window.min(config.box_section.lambda));
            let spec = config.ensemble_spec()?;
            let art = stage_dynamics(
                &config,
                &out_dir,
                stage_seed(cli.seed, "dynamics", 0),
                &window,
                spec.density(),
            )?;
            manifest.record("dynamics", &out_dir.join("dynamics.json"));
            println!(
                "window pairing at t_end: {:.6} +- {:.6}; martingale {:.2} se",
                art.window_pairing_mean, art.window_pairing_se, art.martingale_se_units
            );
            art.martingale_pass
        }
        Command::EstimateCorrelations => {
            let art = stage_correlations(&config, &out_dir)?;
            manifest.record("correlations", &out_dir.join("correlations.json"));
            println!(
                "k1 bins: {}, k2 bins: {}",
                art.order1.values.len(),
                art.order2.values.len()
            );
            true
        }
        Command::CheckRuelle => cmd_check_ruelle(&config, &out_dir, cli.seed, &mut manifest)?,
        Command::CheckPartitionRatio => {
            let spec = config.ensemble_spec()?;
            let report = partition_ratio_check(
                &spec,
                &config.partition.counts,
                Some((
                    &config.mcmc_params(),
                    config.partition.insertions,
                    stage_seed(cli.seed, "insertion", 0),
                )),
                &config.quadrature_params(),
            )?;
            write_json(&out_dir.join("partition_ratio.json"), &report)?;
            manifest.record("partition_ratio", &out_dir.join("partition_ratio.json"));
            for e in &report.entries {
                println!(
                    "N={} rho={:.3} ratio={:.6} +- {:.2e} [{:?}]",
                    e.n, e.density, e.ratio, e.se, e.method
                );
            }
            report.pass
        }
        Command::CheckMartingale => cmd_check_martingale(&config, &out_dir, cli.seed, &mut manifest)?,
        Command::CheckInvariance => cmd_check_invariance(&config, &out_dir, cli.seed, &mut manifest)?,
        Command::CheckTightness => cmd_check_tightness(&config, &out_dir, cli.seed, &mut manifest)?,
        Command::NvLimit => {
            let report = run_nv_limit(&config, &out_dir, cli.seed)?;
            manifest.record("nv_report", &out_dir.join("nv_report.json"));
            manifest.record("stabilization", &out_dir.join("stabilization.csv"));
            for row in &report.stabilization {
                println!(
                    "{}: deltas {:?} decreasing={} final_ok={}",
                    row.observable, row.deltas, row.decreasing_within_noise, row.final_within_3se
                );
            }
            report.pass
        }
        Command::VerifyPotential => cmd_verify_potential(&config, &out_dir, cli.seed, &mut manifest)?,
        Command::ConfigDump => {
            println!("{}", toml::to_string_pretty(&config).map_err(|e| Error::Config(e.to_string()))?);
            true
        }
    };
    manifest.save(&out_dir)?;
    Ok(pass)
}

fn cmd_check_ruelle(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    manifest: &mut ExperimentManifest,
) -> Result<bool> {
    let dim = config.box_section.dim;
    let pot = config.potential_spec()?;
    if config.ruelle.lambdas.len() != config.ruelle.counts.len() || config.ruelle.lambdas.is_empty()
    {
        return Err(Error::Config(
            "ruelle sweep needs matching lambdas and counts".into(),
        ));
    }
    let mut groups = Vec::new();
    for (i, (&lambda, &count)) in config
        .ruelle
        .lambdas
        .iter()
        .zip(&config.ruelle.counts)
        .enumerate()
    {
        let geometry = BoxGeometry::new(dim, lambda)?;
        let spec = EnsembleSpec::new(
            count,
            geometry,
            config.ensemble.beta,
            pot.clone(),
            config.ensemble.rho_max,
        )?;
        let quadrature_feasible = count.saturating_sub(1) * dim <= 6 && count * dim <= 6;
        let estimates = if quadrature_feasible {
            let oracle =
                QuadratureOracle::new(spec.clone(), config.policy(), config.quadrature_params())?;
            vec![
                oracle.correlation_estimate(1, 8)?,
                oracle.correlation_estimate(2, config.correlations.bins)?,
            ]
        } else {
            if !config.ruelle.allow_mcmc {
                return Err(Error::Config(format!(
                    "N={count} is beyond the quadrature oracle and [ruelle] allow_mcmc=false; \
                     enable sampling or reduce counts"
                )));
            }
            let ens = sample_canonical(&spec, &config.mcmc_params(), stage_seed(seed, "ruelle", i as u64))?;
            vec![
                estimate_correlation(&ens, &spec.geometry, 1, config.correlations.bins)?,
                estimate_correlation(&ens, &spec.geometry, 2, config.correlations.bins)?,
            ]
        };
        groups.push(RuelleGroup {
            geometry: spec.geometry,
            beta: config.ensemble.beta,
            estimates,
        });
    }
    let report = check_ruelle(&groups, &pot, &config.policy())?;
    write_json(&out_dir.join("ruelle.json"), &report)?;
    manifest.record("ruelle", &out_dir.join("ruelle.json"));
    for e in &report.entries {
        println!(
            "lambda={} xi_hat={:.4} zeta_hat={:.4} near_core={:.4}",
            e.lambda, e.xi_hat, e.zeta_hat, e.near_core_sup
        );
    }
    println!(
        "xi spread {:.1}%, zeta spread {:.1}%",
        100.0 * report.xi_rel_spread,
        100.0 * report.zeta_rel_spread
    );
    Ok(report.pass)
}

fn battery_observable(config: &Config) -> Result<CylinderObservable> {
    let dim = config.box_section.dim;
    let radius = 0.8 * config.box_section.lambda.min(1.5);
    Ok(CylinderObservable {
        outer: OuterFn::Tanh {
            weights: vec![0.8],
            intercept: 0.0,
            amplitude: 1.0,
        },
        inner: vec![bump_observable(
            dim,
            &vec![0.0; dim],
            radius,
            VelocityProfile::Coord { axis: 0, scale: 2.0 },
        )?],
    })
}

fn sampled_ensemble(config: &Config, seed: u64) -> Result<(EnsembleSpec, GibbsEnsemble)> {
    let spec = config.ensemble_spec()?;
    let ens = sample_canonical(&spec, &config.mcmc_params(), stage_seed(seed, "gibbs", 0))?;
    Ok((spec, ens))
}

fn cmd_check_martingale(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    manifest: &mut ExperimentManifest,
) -> Result<bool> {
    let (spec, ens) = sampled_ensemble(config, seed)?;
    let obs = battery_observable(config)?;
    let mut params = config.dynamics_params(stage_seed(seed, "dynamics", 0))?;
    params.t_end = params.t_end.max(config.martingale.t);
    let report = crate::dynamics::check_martingale(
        &ens,
        &obs,
        &spec.pot,
        &spec.geometry,
        &params,
        config.martingale.s,
        config.martingale.t,
    )?;
    write_json(&out_dir.join("martingale.json"), &report)?;
    manifest.record("martingale", &out_dir.join("martingale.json"));
    println!(
        "martingale increment {:.2} se; correlators {:?}",
        report.increment_se_units, report.correlator_se_units
    );
    Ok(report.pass)
}

fn cmd_check_invariance(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    manifest: &mut ExperimentManifest,
) -> Result<bool> {
    let (spec, ens) = sampled_ensemble(config, seed)?;
    let params = config.dynamics_params(stage_seed(seed, "dynamics", 0))?;
    let dim = config.box_section.dim;
    // three seeded cylinder observables
    let mut extra = Vec::new();
    for (k, profile) in [
        VelocityProfile::One,
        VelocityProfile::Coord { axis: 0, scale: 2.0 },
        VelocityProfile::SpeedSquared { scale: 2.0 },
    ]
    .into_iter()
    .enumerate()
    {
        let center = vec![0.2 * (k as f64 - 1.0); dim];
        let obs = CylinderObservable {
            outer: OuterFn::Tanh {
                weights: vec![0.7],
                intercept: 0.1 * k as f64,
                amplitude: 1.0,
            },
            inner: vec![bump_observable(
                dim,
                &center,
                0.7 * config.box_section.lambda,
                profile,
            )?],
        };
        extra.push((format!("cylinder_{k}"), obs));
    }
    let report = check_invariance(&ens, &spec.pot, &spec.geometry, &params, &extra)?;
    write_json(&out_dir.join("invariance.json"), &report)?;
    manifest.record("invariance", &out_dir.join("invariance.json"));
    for o in &report.observables {
        println!(
            "{}: drift {:.2} se, KS {:.4} (crit {:.4}) {}",
            o.name,
            o.drift_se_units,
            o.ks_statistic,
            o.ks_critical_1pct,
            if o.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(report.pass)
}

fn cmd_check_tightness(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    manifest: &mut ExperimentManifest,
) -> Result<bool> {
    let dim = config.box_section.dim;
    let pot = config.potential_spec()?;
    let mut all_pass = true;
    let mut slopes = Vec::new();
    let mut prefactors = Vec::new();
    let mut reports = Vec::new();
    for (i, &lambda) in config.tightness.lambdas.iter().enumerate() {
        let geometry = BoxGeometry::new(dim, lambda)?;
        let count = ((config.nv.rho * geometry.volume()).round() as usize).max(2);
        let spec = EnsembleSpec::new(
            count,
            geometry,
            config.ensemble.beta,
            pot.clone(),
            config.ensemble.rho_max,
        )?;
        let mut mcmc = config.mcmc_params();
        mcmc.n_samples = config.tightness.n_paths;
        let ens = sample_canonical(&spec, &mcmc, stage_seed(seed, "tightness-gibbs", i as u64))?;
        let mut params = config.dynamics_params(stage_seed(seed, "tightness-dyn", i as u64))?;
        params.t_end = config.tightness.gaps.iter().fold(0.0f64, |m, &g| m.max(g));
        let metric = {
            let mut m: MetricParams = config.metric_params()?;
            m.dim = dim;
            m
        };
        let pairs: Vec<(f64, f64)> = config.tightness.gaps.iter().map(|&g| (0.0, g)).collect();
        let report = tightness_moment(&ens, &pot, &geometry, &params, &metric, &pairs)?;
        println!(
            "lambda={lambda}: slope {:.3}, prefactor {:.3e} ({})",
            report.slope,
            report.prefactor,
            if report.pass { "ok" } else { "FAIL" }
        );
        all_pass &= report.pass;
        slopes.push(report.slope);
        prefactors.push(report.prefactor);
        reports.push(report);
    }
    // prefactor stability across boxes
    if prefactors.len() >= 2 {
        let hi = prefactors.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lo = prefactors.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let stable = (hi - lo) / hi.max(1e-300) < 0.5;
        println!("prefactor spread {:.1}%", 100.0 * (hi - lo) / hi);
        all_pass &= stable;
    }
    write_json(&out_dir.join("tightness.json"), &reports)?;
    manifest.record("tightness", &out_dir.join("tightness.json"));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .zip(&config.tightness.lambdas)
        .flat_map(|(r, &l)| {
            r.entries
                .iter()
                .map(move |e| vec![fmt_f64(l), fmt_f64(e.gap), fmt_f64(e.moment), fmt_f64(e.se)])
        })
        .collect();
    write_csv(
        &out_dir.join("tightness.csv"),
        &["lambda", "gap", "third_moment", "se"],
        &rows,
    )?;
    Ok(all_pass)
}

fn cmd_verify_potential(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    manifest: &mut ExperimentManifest,
) -> Result<bool> {
    let dim = config.box_section.dim;
    let pot = config.potential_spec()?;
    let boxes: Vec<BoxGeometry> = config
        .ruelle
        .lambdas
        .iter()
        .map(|&l| BoxGeometry::new(dim, l))
        .collect::<Result<_>>()?;
    let grid = if dim == 1 { 512 } else { 96 };
    let report = check_uniform_bounds(
        &pot,
        &boxes,
        &config.policy(),
        config.ensemble.beta,
        grid,
        200,
        stage_seed(seed, "verify", 0),
    )?;
    let minorant_ok = if pot.has_repulsion() {
        build_repulsion_minorant(|t| pot.repulsion(t), dim, &MinorantOptions::default()).is_ok()
    } else {
        true
    };
    write_json(&out_dir.join("potential_bounds.json"), &report)?;
    manifest.record("potential_bounds", &out_dir.join("potential_bounds.json"));
    for e in &report.per_box {
        println!(
            "lambda={}: inf phi_per {:.4}, tail sup {:.4}, b_hat {:.4}, grad norms {:?}",
            e.lambda, e.inf_periodized, e.tail_ratio_sup, e.stability_b_hat, e.grad_norms
        );
    }
    Ok(report.all_lower_bounds_ok && minorant_ok)
}
