//! End-to-end experiment runs on small configurations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use steinmp::config::{ConfigFile, Overrides};
use steinmp::pgm::{read_pgm, write_pgm};
use steinmp::table::{matrix_table, parse_matrix};
use steinmp::{run_experiment, Experiment, ExperimentConfig, RunError, RunManifest};

fn config(experiment: Experiment, json: &str, out: &Path) -> ExperimentConfig {
    let cli = Overrides {
        output_dir: Some(out.to_owned()),
        ..Overrides::default()
    };
    ExperimentConfig::resolve(experiment, ConfigFile::from_json(json).unwrap(), &cli).unwrap()
}

/// File name → bytes, excluding the manifest (it records wall-clock time).
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect()
}

/// Column of a CSV with a header row, parsed as text.
fn column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_owned()).collect()
}

fn reals(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|s| s.parse().unwrap()).collect()
}

fn assert_deterministic(experiment: Experiment, json: &str) -> tempfile::TempDir {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config(experiment, json, a.path())).unwrap();
    let mb = run_experiment(&config(experiment, json, b.path())).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(!sa.is_empty());
    assert_eq!(sa, sb, "{experiment} outputs differ between identical runs");
    assert_eq!(ma.input_hash, mb.input_hash);
    assert_eq!(ma.outputs, mb.outputs);
    let mut listed = ma.outputs.clone();
    listed.sort();
    assert_eq!(listed, sa.keys().cloned().collect::<Vec<_>>());
    assert_eq!(RunManifest::read(a.path()).unwrap(), ma);
    a
}

#[test]
fn gaussian_collapse_initial_variance_and_determinism() {
    let dir = assert_deterministic(
        Experiment::GaussianCollapse,
        r#"{"gaussian_collapse": {"dimensions": [1, 100], "particle_counts": [50]}, "iterations": 0}"#,
    );
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let var = reals(&summary, "var_avg_end");
    // sample variance of N(0, 25): sd 25·√(2/M) per coordinate, averaged over D
    assert!((var[0] - 25.0).abs() < 4.0 * 25.0 * (2.0f64 / 50.0).sqrt(), "{}", var[0]);
    assert!((var[1] - 25.0).abs() < 4.0 * 25.0 * (2.0f64 / 5000.0).sqrt(), "{}", var[1]);
    assert_eq!(reals(&summary, "var_avg_begin"), var);
    assert_eq!(
        fs::read_to_string(dir.path().join("diagnostics_svgd_d1_m50.csv")).unwrap(),
        "iteration,pamrf_inf,pamrf_2,paksg_inf,paksg_2,mean_avg,var_avg,max_abs_move\n"
    );
}

#[test]
fn gaussian_collapse_variance_shrinks_with_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Experiment::GaussianCollapse,
        r#"{"gaussian_collapse": {"dimensions": [2, 100], "particle_counts": [50]}, "iterations": 2000}"#,
        dir.path(),
    );
    run_experiment(&cfg).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let var = reals(&summary, "var_avg_end");
    assert!(var[1] < var[0], "{var:?}");
    let traj = fs::read_to_string(dir.path().join("diagnostics_svgd_d100_m50.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2001);
}

#[test]
fn grid_mrf_smoke_and_truth_reuse() {
    let json = r#"{"grid_mrf": {"rows": 2, "cols": 2, "hmc": {"samples_per_chain": 2000}, "pamrf_sweep": [2, 3]},
                   "particles": 20, "iterations": 150}"#;
    let dir = assert_deterministic(Experiment::GridMrf, json);
    let mse = fs::read_to_string(dir.path().join("mse.csv")).unwrap();
    assert_eq!(mse.lines().count(), 1 + 4 * 4);
    assert!(reals(&mse, "mse").iter().all(|v| v.is_finite() && *v >= 0.0));
    let draws = fs::read_to_string(dir.path().join("mse_draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 4 * 4 * 10);
    let slopes = fs::read_to_string(dir.path().join("pamrf_slopes.csv")).unwrap();
    assert_eq!(column(&slopes, "method"), vec!["svgd", "mpsvgd-s", "mpsvgd-m"]);

    // the generated reference, loaded back from disk, gives the same table
    let truth = dir.path().join("truth_samples.csv");
    let reuse = tempfile::tempdir().unwrap();
    let json2 = json.replace(r#""rows": 2,"#, &format!(r#""truth_file": {:?}, "rows": 2,"#, truth));
    let cfg = config(Experiment::GridMrf, &json2, reuse.path());
    let m = run_experiment(&cfg).unwrap();
    assert_eq!(fs::read_to_string(reuse.path().join("mse.csv")).unwrap(), mse);
    assert!(!m.outputs.iter().any(|o| o == "truth_samples.csv"));
    assert_eq!(m.inputs, vec![truth]);
}

#[test]
fn grid_mrf_rejects_mismatched_truth() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("t.csv");
    matrix_table(&steinmp_core::Matrix::zeros(5, 3)).write(&truth).unwrap();
    let json = format!(r#"{{"grid_mrf": {{"rows": 2, "cols": 2, "truth_file": {truth:?}}}, "iterations": 5}}"#);
    let err = run_experiment(&config(Experiment::GridMrf, &json, &dir.path().join("out"))).unwrap_err();
    assert!(matches!(err, RunError::Input { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn bandwidth_study_schema() {
    let dir = assert_deterministic(
        Experiment::BandwidthStudy,
        r#"{"bandwidth_study": {"dimensions": [50], "exponents": [0.75, 1.0]}, "iterations": 40, "particles": 20}"#,
    );
    let traj = fs::read_to_string(dir.path().join("trajectory_svgd_a1_d50.csv")).unwrap();
    assert_eq!(traj.lines().count(), 41);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(column(&summary, "dimension"), vec!["50", "50"]);
    assert!(dir.path().join("trajectory_svgd_a0.75_d50.csv").exists());
}

#[test]
fn denoise_outputs_and_pre_noised_input() {
    let json = r#"{"denoise": {"synthetic_size": 24}, "iterations": 15, "particles": 8}"#;
    let dir = assert_deterministic(Experiment::Denoise, json);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let psnr = reals(&metrics, "psnr");
    assert!(psnr[1] > psnr[0], "{psnr:?}");
    let noisy = read_pgm(dir.path().join("noisy.pgm")).unwrap();
    assert_eq!((noisy.width(), noisy.height()), (24, 24));

    // feeding the written noisy image back bypasses noise addition and
    // reproduces the recovered image
    let rerun = tempfile::tempdir().unwrap();
    let json2 = format!(
        r#"{{"denoise": {{"clean": {:?}, "noisy": {:?}}}, "iterations": 15, "particles": 8}}"#,
        dir.path().join("clean.pgm"),
        dir.path().join("noisy.pgm")
    );
    run_experiment(&config(Experiment::Denoise, &json2, rerun.path())).unwrap();
    assert_eq!(
        fs::read(rerun.path().join("recovered.pgm")).unwrap(),
        fs::read(dir.path().join("recovered.pgm")).unwrap()
    );
    assert_eq!(fs::read_to_string(rerun.path().join("metrics.csv")).unwrap(), metrics);
}

#[test]
fn single_particle_denoise_smooths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Experiment::Denoise, r#"{"iterations": 60, "particles": 1}"#, dir.path());
    run_experiment(&cfg).unwrap();
    let tv = |p: &Path| {
        let img = read_pgm(p).unwrap();
        let mut s = 0.0;
        for r in 0..img.height() {
            for c in 1..img.width() {
                s += (img.get(r, c) - img.get(r, c - 1)).abs();
            }
        }
        s
    };
    assert!(tv(&dir.path().join("recovered.pgm")) < 0.5 * tv(&dir.path().join("noisy.pgm")));
}

#[test]
fn malformed_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_pgm = dir.path().join("bad.pgm");
    fs::write(&bad_pgm, b"P5\n4 4\n65535\n").unwrap();
    let json = format!(r#"{{"denoise": {{"clean": {bad_pgm:?}}}, "iterations": 1}}"#);
    let err = run_experiment(&config(Experiment::Denoise, &json, &dir.path().join("o1"))).unwrap_err();
    assert_eq!(err.exit_code(), 1, "{err}");

    let bad_prior = dir.path().join("prior.json");
    fs::write(&bad_prior, r#"{"filters": [[1, -1]]}"#).unwrap();
    let img = dir.path().join("ok.pgm");
    write_pgm(&img, &steinmp::experiments::synthetic_image(16)).unwrap();
    let json = format!(r#"{{"denoise": {{"clean": {img:?}, "prior": {bad_prior:?}}}, "iterations": 1}}"#);
    let err = run_experiment(&config(Experiment::Denoise, &json, &dir.path().join("o2"))).unwrap_err();
    assert_eq!(err.exit_code(), 1, "{err}");
}

#[test]
fn truth_csv_round_trips_through_parser() {
    let m = steinmp_core::Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 / 7.0 - 0.3);
    assert_eq!(parse_matrix(&matrix_table(&m).render()).unwrap(), m);
}
