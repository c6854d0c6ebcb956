//! Command-line behavior: exit codes, config validation, pipeline
//! composability and serial reproducibility.

use langebox::harness::cli_dispatch;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["langebox"];
    argv.extend_from_slice(args);
    cli_dispatch(argv)
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(run(&["frobnicate"]), 1);
}

#[test]
fn usage_error_exits_one() {
    assert_eq!(run(&["sample-gibbs", "--set"]), 1);
}

#[test]
fn config_dump_works_without_a_file() {
    let dir = tmp();
    let out = dir.path().join("o");
    assert_eq!(
        run(&["config-dump", "--out", out.to_str().unwrap()]),
        0
    );
}

#[test]
fn sample_then_estimate_pipeline() {
    let dir = tmp();
    let out = dir.path().to_str().unwrap().to_string();
    let args_common = [
        "--out",
        out.as_str(),
        "--seed",
        "7",
        "--set",
        "potential.name=ideal_gas",
        "--set",
        "ensemble.n=3",
        "--set",
        "mcmc.n_samples=200",
        "--set",
        "mcmc.burn_in_sweeps=20",
        "--set",
        "mcmc.thin_sweeps=1",
    ];
    let mut a = vec!["sample-gibbs"];
    a.extend_from_slice(&args_common);
    assert_eq!(run(&a), 0);
    assert!(dir.path().join("ensemble.snap").exists());
    assert!(dir.path().join("manifest.json").exists());

    let mut b = vec!["estimate-correlations"];
    b.extend_from_slice(&args_common);
    assert_eq!(run(&b), 0);
    assert!(dir.path().join("correlations.json").exists());
    assert!(dir.path().join("pair_correlation.csv").exists());
}

#[test]
fn check_ruelle_without_sampling_on_infeasible_counts_exits_one() {
    let dir = tmp();
    let code = run(&[
        "check-ruelle",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "ruelle.allow_mcmc=false",
        "--set",
        "ruelle.lambdas=[2.0,4.0]",
        "--set",
        "ruelle.counts=[8,16]",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn invalid_density_exits_one() {
    let dir = tmp();
    let code = run(&[
        "sample-gibbs",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "ensemble.n=1000",
        "--set",
        "ensemble.rho_max=0.5",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn nv_limit_is_serially_reproducible_and_composable() {
    // the growing-box pipeline must (a) reproduce its numeric outputs bit
    // for bit on a rerun, and (b) produce the same ensemble file as the
    // standalone sampling command run with the stage seed
    let dir_a = tmp();
    let dir_b = tmp();
    let common = [
        "--seed",
        "11",
        "--deterministic",
        "--set",
        "potential.name=ideal_gas",
        "--set",
        "nv.lambdas=[2.0,3.0]",
        "--set",
        "nv.counts=[2,3]",
        "--set",
        "nv.rho=0.5",
        "--set",
        "nv.window=1.0",
        "--set",
        "nv.run_dynamics=false",
        "--set",
        "mcmc.n_samples=150",
        "--set",
        "mcmc.burn_in_sweeps=20",
        "--set",
        "mcmc.thin_sweeps=1",
        "--set",
        "correlations.bins=16",
    ];
    for dir in [&dir_a, &dir_b] {
        let mut a = vec!["nv-limit", "--out", dir.path().to_str().unwrap()];
        a.extend_from_slice(&common);
        let code = run(&a);
        assert!(code == 0 || code == 2, "unexpected exit {code}");
    }
    for name in ["nv_report.json", "stabilization.csv", "box_0/correlations.json"] {
        let x = std::fs::read(dir_a.path().join(name)).unwrap();
        let y = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    // composability: the per-box ensemble equals a standalone sample-gibbs
    // with the derived stage seed
    let stage_seed = langebox::rng::stage_seed(11, "gibbs", 0);
    let dir_c = tmp();
    let code = run(&[
        "sample-gibbs",
        "--out",
        dir_c.path().to_str().unwrap(),
        "--seed",
        "0",
        "--deterministic",
        "--set",
        "potential.name=ideal_gas",
        "--set",
        "box.lambda=2.0",
        "--set",
        "ensemble.n=2",
        "--set",
        "mcmc.n_samples=150",
        "--set",
        "mcmc.burn_in_sweeps=20",
        "--set",
        "mcmc.thin_sweeps=1",
    ]);
    assert_eq!(code, 0);
    // the standalone command derives its own stage seed from the root seed;
    // compare payloads through the library to factor the seed fields out
    let (_, ens_a) =
        langebox::harness::nv::load_ensemble(&dir_a.path().join("box_0/ensemble.snap")).unwrap();
    let spec = langebox::gibbs::EnsembleSpec::new(
        2,
        langebox::geom::BoxGeometry::new(1, 2.0).unwrap(),
        1.0,
        langebox::potential::PotentialSpec::ideal_gas(1),
        2.0,
    )
    .unwrap();
    let params = langebox::gibbs::McmcParams {
        n_samples: 150,
        burn_in_sweeps: 20,
        thin_sweeps: 1,
        ..Default::default()
    };
    let direct = langebox::gibbs::sample_canonical(&spec, &params, stage_seed).unwrap();
    assert_eq!(direct.samples.len(), ens_a.samples.len());
    for (x, y) in direct.samples.iter().zip(&ens_a.samples) {
        assert_eq!(x, y, "pipeline and direct sampling disagree");
    }
}
