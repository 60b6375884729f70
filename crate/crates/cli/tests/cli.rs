use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arrival_core::output::read_numeric_csv;
use arrival_core::special::erfc;
use arrival_core::{q_exact, PacketParams};
use tempfile::TempDir;

fn arrival(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arrival"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ARRIVAL_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn exact_first_row_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["exact"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("exact.csv")).unwrap();
    let (header, rows) = read_numeric_csv(&text).unwrap();
    assert_eq!(header, ["t", "q_exact"]);
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - 0.5 * erfc(5.0)).abs() <= 1e-15 * rows[0][1]);
    let params = PacketParams::default();
    for r in &rows {
        assert_eq!(r[1].to_bits(), q_exact(&params, r[0]).to_bits());
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(summary["q_limit"].as_f64().unwrap(), 0.5 * erfc(-2.0));
    assert!(summary["t_bar_exact"].as_f64().unwrap() > 0.0);
}

#[test]
fn empty_grid_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["exact", "--set", "grid.n_points=0"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n_points"));
}

#[test]
fn unknown_key_is_rejected_with_its_name() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[packet]\na = 1.0\nwidth = 2.0\n").unwrap();
    let o = arrival(
        &["exact", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("width") && err.contains("line 3"), "{err}");
}

#[test]
fn lambda_scan_rejects_equal_widths() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["lambda-scan", "--set", "packet.c=1.0"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn lambda_scan_reports_finite_threshold() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["lambda-scan"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "threshold.json")).unwrap();
    let lc = report["lambda_crit"].as_f64().unwrap();
    assert!(lc.is_finite() && lc > 0.0);
    assert!(report["below"]["vx"].as_f64().unwrap() > 0.0);
    assert!(report["above"]["vx"].as_f64().unwrap() < 0.0);
    let (_, rows) =
        read_numeric_csv(&fs::read_to_string(dir.path().join("scan.csv")).unwrap()).unwrap();
    let scan_min = rows.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    assert!(scan_min >= lc && scan_min <= lc * (1.0 + 1e-4));
}

#[test]
fn single_trajectory_smoke_run() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["simulate", "--set", "run.n=1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) =
        read_numeric_csv(&fs::read_to_string(dir.path().join("curves.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r[2] == 0.0 || r[2] == 1.0));
}

#[test]
fn bohmian_run_has_no_leaving_events() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["simulate", "--set", "run.n=400"], dir.path());
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(summary["leaving_events"], 0);
    assert_eq!(summary["kind"], "bohmian");
    assert_eq!(summary["config"]["run"]["n"], 400);
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate",
        "--seed",
        "99",
        "--set",
        "run.n=300",
        "--set",
        "field.kind=bohm-like",
        "--set",
        "field.lambda=2500",
        "--set",
        "events.log=true",
    ];
    let mut outs = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = dir.path().join(tag);
        let mut full = args.to_vec();
        full.extend(["--workers", workers]);
        let o = arrival(&full, &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(out);
    }
    for name in ["curves.csv", "events.csv", "summary.json", "manifest.toml"] {
        let first = read(&outs[0], name);
        for other in &outs[1..] {
            assert!(first == read(other, name), "{name} differs");
        }
    }
}

#[test]
fn manifest_reruns_bit_identically() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let o = arrival(
        &[
            "simulate",
            "--set",
            "run.n=200",
            "--set",
            "grid.n_points=51",
        ],
        &first,
    );
    assert_eq!(code(&o), 0);
    let manifest = first.join("manifest.toml");
    let again = dir.path().join("again");
    let o = arrival(
        &["simulate", "--config", manifest.to_str().unwrap()],
        &again,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&first, "curves.csv") == read(&again, "curves.csv"));
    assert!(read(&first, "manifest.toml") == read(&again, "manifest.toml"));
}

#[test]
fn verify_passes_and_reports_residuals() {
    let dir = TempDir::new().unwrap();
    let o = arrival(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "verify.json")).unwrap();
    assert_eq!(report["all_passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 10);
    for c in checks {
        assert!(c["residual"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    }
}

#[test]
fn perturbed_erfc_fails_verification() {
    let dir = TempDir::new().unwrap();
    let o = arrival(
        &["verify", "--set", "verify.erfc_perturbation=1e-3"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "verify.json")).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"occupancy_vs_quadrature"), "{failed:?}");
}

#[test]
fn integrator_failures_abort_with_code_three() {
    let dir = TempDir::new().unwrap();
    let o = arrival(
        &[
            "simulate",
            "--set",
            "run.n=20",
            "--set",
            "integrator.max_step=1e-16",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn currents_grid_shape() {
    let dir = TempDir::new().unwrap();
    let o = arrival(
        &[
            "currents",
            "--set",
            "currents.times=[1.0, 2.0]",
            "--set",
            "currents.n_plane=5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) =
        read_numeric_csv(&fs::read_to_string(dir.path().join("currents.csv")).unwrap()).unwrap();
    assert_eq!(header.len(), 8);
    assert_eq!(rows.len(), 2 * 5 * 5);
    // Bohmian: both currents coincide.
    assert!(rows.iter().all(|r| r[4] == r[5]));
}
