//! The `msym` binary: exit codes, printed summaries and artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn msym(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let file = dir.join("exp.toml");
    std::fs::write(&file, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_msym"))
        .arg("--config")
        .arg(&file)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn verify_mscl_on_a_midpoint_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"verify-mscl\"\n[scheme]\nname = \"splitting\"\ncell = true\n[grid]\nx_left = -3.141592653589793\nx_right = 3.141592653589793\ncells = 40\n";
    let o = msym(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("mscl residual") && out.contains("threshold="), "{out}");
    let m = manifest(dir.path());
    assert_eq!(m["command"], "verify-mscl");
    assert!(m["summary"]["max_residual"].as_f64().unwrap() <= 1e-9);
    assert!(dir.path().join("out/residuals.csv").exists());
}

#[test]
fn verify_mscl_flags_the_euler_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"verify-mscl\"\n[scheme]\nname = \"lrbf-euler\"\n[grid]\ncells = 24\n[time]\nt_final = 0.2\ndt = 0.05\n";
    let o = msym(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(manifest(dir.path())["summary"]["max_residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn invalid_values_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = msym(dir.path(), "command = \"energy\"\n[time]\ndt = -0.1\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time.dt"), "{}", stderr(&o));
    let o = msym(dir.path(), "command = \"energy\"\n[grid]\nbogus = 1\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.bogus"), "{}", stderr(&o));
    let o = msym(dir.path(), "command = \"energy\"\n", &["--paths", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out/manifest.json").exists());
    let missing = Command::new(env!("CARGO_BIN_EXE_msym")).args(["--config", "/nonexistent/exp.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn check_tableau_passes_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = msym(dir.path(), "command = \"check-tableau\"\n[tableau]\nkind = \"nls-prk\"\nname = \"gauss2\"\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("condition ")).count(), 8);
    let o = msym(dir.path(), "command = \"check-tableau\"\n[tableau]\na = [[0.501]]\nb = [1.0]\n", &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("condition symplectic: residual=2.000000e-3"), "{}", stdout(&o));
    assert_eq!(manifest(dir.path())["summary"]["failures"][0], "symplectic");
}

#[test]
fn convergence_writes_ladder_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"convergence\"\nseed = 3\n[scheme]\nname = \"prk\"\n[grid]\nx_left = -3.141592653589793\nx_right = 3.141592653589793\ncells = 16\nprofile = \"sin\"\n[time]\nt_final = 0.5\nladder = [0.125, 0.0625]\nreference_dt = 0.015625\n";
    let o = msym(dir.path(), cfg, &["--paths", "4", "--seed", "11", "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("slope="));
    let csv = std::fs::read_to_string(dir.path().join("out/ladder.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "level,dt,log2_dt,error,log2_error,stderr");
    assert_eq!(lines.count(), 2);
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["paths"], 4);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["git_describe"].is_string());
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["outputs"], serde_json::json!(["ladder.csv", "manifest.json"]));
    assert_eq!(m["summary"]["levels"].as_array().unwrap().len(), 2);
    // Same seed, same numbers.
    let first = csv.clone();
    let o = msym(dir.path(), cfg, &["--paths", "4", "--seed", "11", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("out/ladder.csv")).unwrap(), first);
}

#[test]
fn energy_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"energy\"\npaths = 3\n[system]\nf = \"0\"\ng = \"1\"\n[scheme]\nname = \"splitting\"\n[grid]\nx_left = -3.141592653589793\nx_right = 3.141592653589793\ncells = 12\nprofile = \"sin\"\n[time]\nt_final = 0.5\ndt = 0.05\n";
    let o = msym(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("energy slope="));
    let csv = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "step,t,energy");
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn build_diffop_and_sample_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = msym(dir.path(), "command = \"build-diffop\"\n[grid]\ncells = 16\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/diffop.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "row,col,weight");
    assert!(stdout(&o).contains("operator dim=15"), "{}", stdout(&o));
    let m = manifest(dir.path());
    assert_eq!(m["summary"]["dim"], 15);

    let o = msym(dir.path(), "command = \"sample-noise\"\n[grid]\ncells = 8\n[time]\nt_final = 0.5\ndt = 0.125\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("noise steps=4 nodes=7"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/noise.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 7);
    assert_eq!(csv.lines().next().unwrap(), "step,node_index,increment");
}
