//! The `stein-mp` binary: argument handling and exit codes.

use std::process::Command;

fn stein_mp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stein-mp"))
}

#[test]
fn successful_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = stein_mp()
        .args(["grid-mrf", "--grid", "2x2", "--particles", "10", "--iterations", "20", "--seed", "4", "--method", "svgd,mpsvgd-m"])
        .arg("--out")
        .arg(dir.path())
        .env("STEINMP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("particles_mpsvgd-m.csv").exists());
    assert!(!dir.path().join("particles_hmc.csv").exists());
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(manifest["config"]["grid_mrf"]["rows"], 2);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"particles": 0}"#).unwrap();
    for args in [
        vec!["bandwidth-study", "--method", "hmc"],
        vec!["grid-mrf", "--grid", "3"],
        vec!["grid-mrf", "--method", "gibbs"],
        vec!["no-such-experiment"],
        vec!["grid-mrf", "--config", cfg.to_str().unwrap()],
        vec!["grid-mrf", "--config", "/definitely/missing.json"],
    ] {
        let out = stein_mp().args(&args).arg("--out").arg(dir.path().join("o")).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = stein_mp()
        .args(["grid-mrf", "--grid", "2x2"])
        .arg("--out")
        .arg(dir.path().join("o"))
        .env("STEINMP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"").unwrap();
    let out = stein_mp()
        .args(["grid-mrf", "--grid", "2x2", "--iterations", "1"])
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_zero() {
    let out = stein_mp().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("--particles"));
}
