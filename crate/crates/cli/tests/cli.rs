//! End-to-end runner checks on deliberately coarse grids.

use std::path::Path;
use std::process::Command;

fn cavchem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavchem"))
}

fn coarse_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("coarse.toml");
    std::fs::write(
        &path,
        r#"
[grids]
x = { min = -20.0, max = 20.0, n_elements = 16, order = 6 }
r = { min = -7.0, max = 7.0, n_elements = 12, order = 6 }
n_states = 8
n_electronic = 4
"#,
    )
    .unwrap();
    path
}

#[test]
fn quantum_rate_runs_and_reproduces_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    for sub in ["a", "b"] {
        let status = cavchem()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--out-dir",
                dir.path().join(sub).to_str().unwrap(),
                "--cache-dir",
                dir.path().join(format!("cache_{sub}")).to_str().unwrap(),
                "quantum-rate",
                "--lambda",
                "0.02",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(dir.path().join("a/correlation.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/correlation.csv")).unwrap();
    assert_eq!(a, b, "same config + seed must reproduce bit-for-bit");
    let ja = std::fs::read(dir.path().join("a/quantum_rate.json")).unwrap();
    let jb = std::fs::read(dir.path().join("b/quantum_rate.json")).unwrap();
    assert_eq!(ja, jb);
    // the hash comment heads every CSV
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# config_hash: "));
    assert!(dir.path().join("a/resolved_config.json").exists());
}

#[test]
fn unknown_config_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nzz = 1.0\n").unwrap();
    let status = cavchem()
        .args([
            "--config",
            bad.to_str().unwrap(),
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
            "bo-scan",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn empty_sweep_is_a_validation_error_with_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let out = dir.path().join("out");
    let status = cavchem()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "arrhenius",
            "--lambda-list",
            "",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.join("arrhenius_fits.json").exists());
}

#[test]
fn npom_sweep_and_scan_analyze_produce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let out = dir.path().join("npom");
    let status = cavchem()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "npom-sweep",
            "--radius-nm",
            "20",
            "--gaps-nm",
            "0.9:1.1:0.1",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let rows = std::fs::read_to_string(out.join("npom_sweep.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 4); // header + 3 gaps

    // scan-analyze on a synthetic file
    let scan = dir.path().join("scan.csv");
    let mut text = String::from("# units: coordinate=deg energy=hartree dipole=au\n");
    text.push_str("coordinate,v0,mu_x,mu_y,mu_z\n");
    for i in 0..60 {
        let th = 3.0 * i as f64;
        let t = th.to_radians();
        // interior minimum at 120 deg, interior maximum at 60 deg
        text.push_str(&format!(
            "{th},{},0.0,0.0,{}\n",
            0.004 * (1.0 - (3.0 * t).cos()),
            1.5 * (t / 2.0).cos()
        ));
    }
    std::fs::write(&scan, text).unwrap();
    let out2 = dir.path().join("scan_out");
    let status = cavchem()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out2.to_str().unwrap(),
            "scan-analyze",
            "--scan",
            scan.to_str().unwrap(),
            "--lambda-list",
            "0,0.03",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("scan_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["per_lambda"].as_array().unwrap().len(), 2);
}

#[test]
fn collective_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let out = dir.path().join("coll");
    let status = cavchem()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "collective",
            "--n",
            "50:200:log3",
            "--seeds",
            "2",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("collective.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7); // header + 3 N x 2 seeds
}
