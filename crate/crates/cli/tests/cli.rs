use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const OCTAGONS: &str = "labyrinth_n = 8\n[pair.p]\nkind = \"regular\"\nsides = 8\ncircumradius = 0.999\n\
                        [pair.q]\nkind = \"regular\"\nsides = 8\ncircumradius = 0.361\n";

fn annulus(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annulus")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn report(dir: &Path, kind: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{kind}.json"))).unwrap()).unwrap()
}

#[test]
fn verify_passes_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let out = annulus(dir.path(), &["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = report(dir.path(), "verify");
    assert_eq!(json["kind"], "verify");
    assert_eq!(json["passed"], true);
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);

    let saved = dir.path().join("saved.json");
    fs::copy(dir.path().join("verify.json"), &saved).unwrap();
    let out = annulus(dir.path(), &["verify", saved.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduces the pass/fail matrix"));
}

#[test]
fn bad_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[mesh]\nresolutoin = 0.01\n").unwrap();
    let out = annulus(dir.path(), &["--config", cfg.to_str().unwrap(), "verify"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolutoin"));
    assert!(!dir.path().join("verify.json").exists());

    let out = annulus(dir.path(), &["--labyrinth-n", "12", "build-labyrinth"]);
    assert!(!out.status.success());
}

#[test]
fn mesh_export_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = annulus(dir.path(), &["--resolution", "0.015", "--export", "mesh", "--export", "field", "export"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["mesh.obj", "field.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn failing_step_exits_with_two_and_keeps_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, format!("{OCTAGONS}[runge]\nbasis_budget = 8\ntau_doublings = 0\n")).unwrap();
    let out = annulus(dir.path(), &["--config", cfg.to_str().unwrap(), "run-step"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let json = report(dir.path(), "run-step");
    assert_eq!(json["passed"], false);
    assert_eq!(json["config"]["labyrinth_n"], 8);
}
