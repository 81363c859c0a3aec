//! End-to-end runs of the compiled binary: simulate -> correct/tune/gate
//! -> compare, plus the error-reporting contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taperlab"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn taperlab");
    assert!(
        out.status.success(),
        "taperlab {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("taperlab-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_truth(path: &Path) {
    let mut csv = String::from("angle_deg,mag_linear\n");
    for i in 0..72 {
        let angle = 5.0 * i as f64;
        let value = 0.05 + 0.95 * (0.5 + 0.5 * (angle.to_radians()).cos()).powf(1.5);
        csv.push_str(&format!("{angle},{value}\n"));
    }
    fs::write(path, csv).unwrap();
}

fn write_channel(path: &Path) {
    let spec = r#"{
        "los_delay_s": 5e-9,
        "echoes": [
            { "delay_s": 9e-9, "amplitude": 0.5, "profile": { "lobed": { "peak_angle_deg": 180.0 } } },
            { "delay_s": 14e-9, "amplitude": 0.316, "profile": "isotropic" }
        ],
        "noise_floor": 0.0316,
        "seed": 7
    }"#;
    fs::write(path, spec).unwrap();
}

#[test]
fn simulate_correct_gate_tune_compare() {
    let dir = workdir("flow");
    let truth = dir.join("truth.csv");
    let channel = dir.join("channel.json");
    let sweep = dir.join("sweep.csv");
    write_truth(&truth);
    write_channel(&channel);

    run_ok(&[
        "simulate",
        "--truth", truth.to_str().unwrap(),
        "--f0", "4e9",
        "--bw", "3e9",
        "--k", "201",
        "--spec", channel.to_str().unwrap(),
        "--out", sweep.to_str().unwrap(),
    ]);
    let sweep_text = fs::read_to_string(&sweep).unwrap();
    assert!(sweep_text.starts_with("freq_hz,angle_deg,re,im\n"));
    assert_eq!(sweep_text.lines().count(), 1 + 201 * 72);

    // Fixed-design correction produces a pattern CSV on the truth grid.
    let corrected = dir.join("corrected.csv");
    run_ok(&[
        "correct",
        "--sweep", sweep.to_str().unwrap(),
        "--f0", "4e9",
        "--n", "512",
        "--s", "256",
        "--thb", "4",
        "--out", corrected.to_str().unwrap(),
    ]);
    let corrected_text = fs::read_to_string(&corrected).unwrap();
    assert!(corrected_text.starts_with("angle_deg,mag_linear\n"));
    assert_eq!(corrected_text.lines().count(), 1 + 72);

    // Each gating baseline writes a pattern too.
    let gated = dir.join("gated.csv");
    run_ok(&[
        "gate",
        "--method", "rect",
        "--sweep", sweep.to_str().unwrap(),
        "--f0", "4e9",
        "--distance", "1.4989622900",
        "--width", "8e-9",
        "--out", gated.to_str().unwrap(),
    ]);
    assert!(fs::read_to_string(&gated).unwrap().lines().count() == 1 + 72);
    run_ok(&[
        "gate",
        "--method", "composite",
        "--sweep", sweep.to_str().unwrap(),
        "--f0", "4e9",
        "--out", gated.to_str().unwrap(),
    ]);

    // Tune with a reduced grid from the config to keep the test fast.
    let config = dir.join("config.json");
    fs::write(
        &config,
        format!(
            r#"{{
                "t_hb": 4.0,
                "sigma": 0.25,
                "grid": {{ "n_start": 301, "n_stop": 501, "n_step": 100,
                           "q_start": 0.3, "q_stop": 0.7, "q_step": 0.2 }},
                "gates": {{ "rectangular": {{ "distance_m": 1.4989622900, "width_s": 8e-9 }} }},
                "datasets": [ {{ "f0_hz": 4e9, "sweep": {sweep:?}, "reference": {truth:?} }} ]
            }}"#,
        ),
    )
    .unwrap();

    let tune_dir = dir.join("tune");
    run_ok(&[
        "--config", config.to_str().unwrap(),
        "tune",
        "--sweep", sweep.to_str().unwrap(),
        "--ref", truth.to_str().unwrap(),
        "--f0", "4e9",
        "--thb", "4",
        "--sigma", "0.25",
        "--out", tune_dir.to_str().unwrap(),
    ]);
    for file in ["tune_report.json", "rc_star.csv", "u_landscape.csv"] {
        assert!(tune_dir.join(file).exists(), "missing {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tune_dir.join("tune_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["designs"].as_array().unwrap().len(), 9);
    assert!(!report["selected"].as_array().unwrap().is_empty());
    let landscape = fs::read_to_string(tune_dir.join("u_landscape.csv")).unwrap();
    assert!(landscape.starts_with("n,s,u\n"));

    let compare_dir = dir.join("compare");
    run_ok(&[
        "--config", config.to_str().unwrap(),
        "compare",
        "--out", compare_dir.to_str().unwrap(),
    ]);
    for file in ["compare_report.json", "compare_table.csv", "patterns_4000MHz.csv"] {
        assert!(compare_dir.join(file).exists(), "missing {file}");
    }
    let table = fs::read_to_string(compare_dir.join("compare_table.csv")).unwrap();
    assert!(table
        .starts_with("f0_hz,uncorrected_db,rectangular_db,hann_db,composite_db,multitaper_db"));
    assert!(table.lines().count() >= 3);

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn dpss_dump_has_expected_shape() {
    let out = run_ok(&["dpss", "--n", "64", "--thb", "4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "order,lambda,sample,value");
    // 7 tapers x 64 samples.
    assert_eq!(lines.len(), 1 + 7 * 64);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0");
    let lambda: f64 = first[1].parse().unwrap();
    assert!(lambda >= 0.999);
}

#[test]
fn errors_are_machine_readable_json() {
    let out = bin()
        .args(["correct", "--sweep", "/nonexistent/sweep.csv", "--f0", "4e9", "--n", "64", "--s", "32", "--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let payload: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(payload["kind"], "io");
    assert!(payload["error"].as_str().unwrap().contains("sweep.csv"));

    // Wrong f0 for the sweep's band is a parameter error.
    let dir = workdir("err");
    let truth = dir.join("truth.csv");
    let channel = dir.join("channel.json");
    let sweep = dir.join("sweep.csv");
    write_truth(&truth);
    fs::write(&channel, r#"{ "los_delay_s": 5e-9 }"#).unwrap();
    run_ok(&[
        "simulate",
        "--truth", truth.to_str().unwrap(),
        "--f0", "4e9",
        "--bw", "3e9",
        "--k", "41",
        "--spec", channel.to_str().unwrap(),
        "--out", sweep.to_str().unwrap(),
    ]);
    let out = bin()
        .args(["correct", "--sweep", sweep.to_str().unwrap(), "--f0", "6e9", "--n", "64", "--s", "32", "--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(payload["kind"], "parameter");
    let _ = fs::remove_dir_all(&dir);
}
