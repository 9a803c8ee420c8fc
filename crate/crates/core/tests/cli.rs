use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"
experiment = "ber_vs_snr"
seed = 5
trials = 3
k = 100
snr_grid_db = [0, 10]

[geometry]
n_h = 3
n_v = 3
"#;

fn sepbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepbeam"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_prints_manifest_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let o = sepbeam(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(Path::new(printed.trim()), out.join("manifest.json"));
    let m = manifest(&out);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["trials"], 3);
    assert!(out.join("ber_vs_snr.csv").exists());
}

#[test]
fn flags_override_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let o = sepbeam(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
        "--trials",
        "2",
        "--workers",
        "2",
        "--experiment",
        "flops_vs_size",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["experiment"], "flops_vs_size");
    assert_eq!(m["config"]["trials"], 2);
    assert_eq!(m["config"]["workers"], 2);
    assert!(out.join("flops_vs_size.csv").exists());
    assert!(!out.join("ber_vs_snr.csv").exists());
}

#[test]
fn cli_matches_library_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("cli");
    assert!(sepbeam(&["run", &cfg_path, "--out", out.to_str().unwrap()])
        .status
        .success());

    let cfg = sepbeam::harness::ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let lib = tmp.path().join("lib");
    sepbeam::harness::run(&cfg, &lib).unwrap();
    for f in ["ber_vs_snr.csv", "ber_vs_snr_summary.csv"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(lib.join(f)).unwrap()
        );
    }
}

#[test]
fn missing_config_fails() {
    let o = sepbeam(&["run", "/nonexistent/cfg.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn unknown_field_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "trails = 3\n");
    let o = sepbeam(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("trails"), "{err}");
}

#[test]
fn invalid_override_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let o = sepbeam(&["run", &cfg, "--workers", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("workers"));

    let o = sepbeam(&["run", &cfg, "--experiment", "fig6"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig6"));
}
