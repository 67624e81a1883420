//! End-to-end checks of the `rabisim` binary: exit codes, output files, and
//! byte-level reproducibility of CSV output for a fixed seed.

use std::path::Path;
use std::process::{Command, Output};

fn rabisim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rabisim"))
        .args(args)
        .output()
        .expect("spawn rabisim")
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("rabisim-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn unknown_preset_exits_with_config_code() {
    let dir = tmp_dir("preset");
    let out = rabisim(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "figure",
        "--preset",
        "nonexistent",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nonexistent"), "stderr: {stderr}");
    assert!(stderr.contains("fig1"), "stderr should list presets: {stderr}");
}

#[test]
fn unknown_engine_exits_with_config_code() {
    let dir = tmp_dir("engine");
    let out = rabisim(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "sweep",
        "--axis",
        "U",
        "--start",
        "-21",
        "--stop",
        "-19",
        "--points",
        "3",
        "--engines",
        "bogus",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_grid_exits_with_config_code() {
    let dir = tmp_dir("grid");
    let out = rabisim(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "sweep",
        "--axis",
        "U",
        "--start",
        "-19",
        "--stop",
        "-21",
        "--points",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_output_is_reproducible() {
    let mut bytes = Vec::new();
    for tag in ["repro-a", "repro-b"] {
        let dir = tmp_dir(tag);
        let out = rabisim(&[
            "--out-dir",
            dir.to_str().unwrap(),
            "--n-max",
            "5",
            "--seed",
            "42",
            "sweep",
            "--axis",
            "U",
            "--start",
            "-21",
            "--stop",
            "-19",
            "--points",
            "5",
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        bytes.push(read(&dir.join("sweep_U.csv")));
    }
    assert_eq!(bytes[0], bytes[1], "identical runs must produce identical CSV");
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    assert!(text.starts_with('#'), "CSV starts with metadata comments");
    assert!(text.lines().any(|l| l.starts_with("axis_value,")));
    // 5 grid points -> 5 data rows
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("axis_value"))
        .count();
    assert_eq!(data_rows, 5);
}

#[test]
fn g2tau_writes_csv() {
    let dir = tmp_dir("g2tau");
    let out = rabisim(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-max",
        "5",
        "g2tau",
        "--tau-kappa",
        "2.0",
        "--points",
        "21",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir.join("g2tau.csv"))).unwrap();
    assert!(text.starts_with('#'));
    let first_row = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("tau"))
        .unwrap();
    let tau0: f64 = first_row.split(',').next().unwrap().parse().unwrap();
    assert_eq!(tau0, 0.0);
}

#[test]
fn figure_preset_writes_manifest_with_checksums() {
    let dir = tmp_dir("figure");
    let out = rabisim(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "figure",
        "--preset",
        "fig1",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&dir.join("fig1_manifest.json"))).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let name = f["name"].as_str().unwrap();
        let sha = f["sha256"].as_str().unwrap();
        assert_eq!(sha.len(), 64);
        assert!(dir.join(name).exists(), "{name} listed but missing");
    }
}
