//! End-to-end checks of the binary: exit codes, error wording, and the
//! shape of stdout and written artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn jjfab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jjfab"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn missing_config_fails_naming_the_file() {
    let out = jjfab()
        .args(["simulate", "--config", "/definitely/not/here.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error: "), "got {err:?}");
    assert!(err.contains("/definitely/not/here.toml"), "got {err:?}");
    assert_eq!(err.trim_end().lines().count(), 1, "one-line errors only");
}

#[test]
fn config_with_a_typo_fails_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "seed = 1\n[scenario]\nsample_size = 5\n").unwrap();
    let out = jjfab()
        .args(["simulate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sample_size"), "got {}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    let out = jjfab().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = jjfab()
        .args(["junction", "--f01-ghz", "4.3", "--rn-ohm", "1e4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "inputs are mutually exclusive");
    let out = jjfab().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn junction_inverts_a_frequency_target() {
    let out = jjfab()
        .args(["junction", "--f01-ghz", "4.3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rn = value["rn_ohm"].as_f64().unwrap();
    assert!((rn - 13566.859478359347).abs() < 1e-6, "got {rn}");
    assert_eq!(value["transmon_regime"], true);
}

#[test]
fn junction_forward_reports_current_density_when_given_an_area() {
    let out = jjfab()
        .args(["junction", "--rn-ohm", "10000", "--area-um2", "0.03"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ic = value["ic_na"].as_f64().unwrap();
    assert!((ic - 28.274333882308138).abs() < 1e-9, "got {ic}");
    assert!(value["jc_a_per_um2"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_qubits_reports_the_rounded_chip_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjfab()
        .args(["analyze", "--qubits"])
        .arg(fixture("qubits_table1.csv"))
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("qubit_stats.json")).unwrap())
            .unwrap();
    assert_eq!(report["total"]["f01_ghz"]["mean"], 4.31);
    assert_eq!(report["total"]["f01_ghz"]["st_dev_percent"], 1.91);
    assert_eq!(report["chips"][0]["chip_id"], "chip1");
    assert_eq!(report["chips"][0]["f01_ghz"]["st_dev_percent"], 1.28);
    // The manifest is written last and hashes every artifact.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "analyze");
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
}

#[test]
fn analyze_measurements_partitions_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjfab()
        .args(["analyze", "--measurements"])
        .arg(fixture("golden_chip.csv"))
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let outliers: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("outliers.json")).unwrap())
            .unwrap();
    assert_eq!(outliers["input_count"], 50);
    assert_eq!(outliers["kept_count"], 47);
    assert_eq!(outliers["short_count"], 1);
    assert_eq!(outliers["open_count"], 1);
    assert_eq!(outliers["mad_rejected_count"], 1);
    assert!(outliers["policy_description"].as_str().unwrap().contains("MAD"));
    for name in [
        "kept.csv",
        "rejected.csv",
        "junction_stats.json",
        "heatmap_100x100.svg",
        "heatmap_150x200.svg",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
}

#[test]
fn analyze_without_inputs_is_an_error() {
    let out = jjfab().arg("analyze").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--measurements"), "got {}", stderr(&out));
}

#[test]
fn sweep_rejects_a_word_on_a_numeric_axis() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "seed = 1\n").unwrap();
    let out = jjfab()
        .args(["sweep", "--config"])
        .arg(&path)
        .args(["--axis", "bottom_angle_deg", "--values", "0,fast"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("\"fast\""), "got {}", stderr(&out));
}
