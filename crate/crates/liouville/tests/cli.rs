//! Command-line surface tests: flags, refusals, artifacts, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liouville"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("liouville-cli-tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn missing_model_file_names_the_path_and_fails() {
    let out = run(&[
        "spectrum",
        "--model",
        "/no/such/model.json",
        "--order",
        "2",
        "--out",
        "/dev/null",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/no/such/model.json"),
        "stderr must name the path: {stderr}"
    );
}

#[test]
fn spectrum_of_amplitude_damping_contains_the_analytic_branches() {
    let dir = workdir("spectrum");
    let out_path = dir.join("spectrum.json");
    let out = run(&[
        "spectrum",
        "--model",
        "builtin:amplitude-damping",
        "--order",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let branches = report["results"]["branches"].as_array().unwrap();
    // γ = coupling² = 0.1, ω = 1: branches -γ/2 ± iω must be present
    let mut found = 0;
    for b in branches {
        let ev = b["eigenvalue"].as_array().unwrap();
        let (re, im) = (ev[0].as_f64().unwrap(), ev[1].as_f64().unwrap());
        if (re + 0.05).abs() < 1e-12 && (im.abs() - 1.0).abs() < 1e-12 {
            found += 1;
        }
    }
    assert_eq!(found, 2, "both damped coherence branches reported");
    // the Markovian model is exact at order 2
    assert!(report["results"]["worst_eigenvalue_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn spectrum_order_zero_has_pure_bohr_branches() {
    let dir = workdir("spectrum0");
    let out_path = dir.join("spectrum0.json");
    let out = run(&[
        "spectrum",
        "--model",
        "builtin:amplitude-damping",
        "--order",
        "0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    for b in report["results"]["branches"].as_array().unwrap() {
        let ev = b["eigenvalue"].as_array().unwrap();
        assert_eq!(ev[0].as_f64().unwrap(), 0.0, "free branches have no decay");
    }
}

#[test]
fn theorem_scan_refuses_fewer_than_five_points() {
    let out = run(&[
        "theorem-scan",
        "--seed",
        "1",
        "--dim",
        "3",
        "--c-min",
        "0.02",
        "--c-max",
        "0.2",
        "--points",
        "3",
        "--out",
        "/dev/null",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("at least 5"), "got: {stderr}");
}

#[test]
fn qbm_refuses_cutoff_below_ten_omega() {
    let out = run(&[
        "qbm", "--gamma0", "0.05", "--temp", "0", "--cutoff-min", "5", "--cutoff-max", "1000",
        "--points", "7", "--omega", "1", "--mass", "1", "--out", "/dev/null",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("below 10x"), "got: {stderr}");
}

#[test]
fn qbm_emits_csv_and_summary() {
    let dir = workdir("qbm");
    let csv_path = dir.join("scan.csv");
    let out = run(&[
        "qbm",
        "--gamma0",
        "0.05",
        "--temp",
        "0",
        "--cutoff-min",
        "100",
        "--cutoff-max",
        "100000",
        "--points",
        "13",
        "--omega",
        "1",
        "--mass",
        "1",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("lambda,sxx_exact,sxx_mixed,det_mixed,heisenberg_ok,positive_ok\n"));
    assert_eq!(csv.lines().count(), 14);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("scan.summary.json")).unwrap())
            .unwrap();
    assert!(summary["pass"].as_bool().unwrap());
    assert!(summary["results"]["lambda_star_heisenberg"].is_number());
}

#[test]
fn positivity_flags_the_demonstration_model() {
    let dir = workdir("positivity");
    let out_path = dir.join("positivity.json");
    let out = run(&[
        "positivity",
        "--model",
        "builtin:positivity",
        "--c",
        "0.1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report["results"]["naive_violates_positivity"].as_bool().unwrap());
    assert!(report["results"]["naive_order2"]["min_eigenvalue"].as_f64().unwrap() < 0.0);
    assert!(report["results"]["exact"]["min_eigenvalue"].as_f64().unwrap() >= -1e-10);
}

#[test]
fn indeterminacy_reports_slopes_and_echoes_the_default_shape() {
    let dir = workdir("indeterminacy");
    let out_path = dir.join("indet.json");
    let out = run(&[
        "indeterminacy",
        "--model",
        "builtin:amplitude-damping",
        "--c",
        "0.2",
        "--t-end",
        "250",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report["pass"].as_bool().unwrap());
    let shape = report["config"]["delta_shape"].as_array().unwrap();
    assert_eq!(shape.len(), 2, "default traceless diagonal shape echoed");
    let bands = report["bands"].as_array().unwrap();
    assert!(bands.iter().all(|b| b["pass"].as_bool().unwrap()));
}

#[test]
fn reports_are_deterministic_up_to_the_timestamp() {
    let dir = workdir("determinism");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for path in [&a, &b] {
        let out = run(&[
            "theorem-scan",
            "--seed",
            "7",
            "--dim",
            "3",
            "--c-min",
            "0.05",
            "--c-max",
            "0.2",
            "--points",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut ra: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let mut rb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    // identical invocation implies byte-identical reports except the
    // timestamp and the output path echoed in the command line
    ra["timestamp_unix"] = serde_json::json!(0);
    rb["timestamp_unix"] = serde_json::json!(0);
    ra["command"] = serde_json::json!([]);
    rb["command"] = serde_json::json!([]);
    assert_eq!(ra, rb);
}

#[test]
fn saved_model_files_round_trip_through_the_cli() {
    let dir = workdir("model-files");
    let model_path = dir.join("ad.json");
    let spec = liouville::models::amplitude_damping_model(1.0, 0.1f64.sqrt());
    liouville::models::save_model(&spec, &model_path).unwrap();
    let out_path = dir.join("spectrum.json");
    let out = run(&[
        "spectrum",
        "--model",
        model_path.to_str().unwrap(),
        "--order",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["config"]["name"], "amplitude-damping");
}
