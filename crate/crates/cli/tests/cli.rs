use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psodrift")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

fn csv_from_stdout(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    std::fs::write(&path, &out.stdout).unwrap();
    csv_rows(&path)
}

const COARSE: [&str; 4] = ["--max-knots", "256", "--quadrature-knots", "1024"];

#[test]
fn omega_for_the_standard_setting() {
    let out = run(&["omega", "--chi", "0.72984", "--cl", "1.496172", "--cg", "1.496172"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "Converges");
    assert_eq!(v["method"], "GeneralSpline");
    assert!(v["omega"].as_f64().unwrap() < 0.0);
    assert!(v["diagnostic"].is_null());
}

#[test]
fn omega_uses_the_closed_form_at_zero_inertia() {
    let out = run(&["omega", "--chi", "0", "--cl", "1.5", "--cg", "1.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["method"], "ChiZeroClosedForm");
    assert_eq!(v["error"].as_f64(), Some(0.0));
}

#[test]
fn omega_negative_inertia_and_divergence() {
    let out = run(&["omega", "--chi", "-0.7", "--cl", "0.5", "--cg", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "Converges");
    let out = run(&["omega", "--chi", "0.9", "--cl", "3", "--cg", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "Diverges");
}

#[test]
fn deterministic_triples_report_without_a_drift() {
    let out = run(&["omega", "--chi", "1.0", "--cl", "0", "--cg", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "DeterministicDiverges");
    assert!(v["omega"].is_null());
}

#[test]
fn undecided_sign_exits_with_two() {
    // A coarse rule just inside the frontier cannot resolve the sign.
    let out = run(&["omega", "--chi", "0.5", "--cl", "2.57", "--cg", "2.57", "--max-knots", "64", "--quadrature-knots", "16"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["verdict"], "Indeterminate");
    assert!(v["omega"].as_f64().unwrap().abs() <= v["error"].as_f64().unwrap());
}

#[test]
fn numerical_failure_exits_with_three() {
    let out = run(&["omega", "--chi", "0.7", "--cl", "1.5", "--cg", "1.5", "--max-iterations", "3"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["verdict"], "Indeterminate");
    assert!(v["diagnostic"].is_string());
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_sixty_four() {
    assert_eq!(run(&["omega", "--chi", "0.5", "--cl", "1"]).status.code(), Some(64));
    assert_eq!(run(&["omega", "--chi", "x", "--cl", "1", "--cg", "1"]).status.code(), Some(64));
    assert_eq!(run(&["omega", "--chi", "NaN", "--cl", "1", "--cg", "1"]).status.code(), Some(64));
    assert_eq!(
        run(&["omega", "--chi", "0.5", "--cl", "1", "--cg", "1", "--max-knots", "8"]).status.code(),
        Some(64)
    );
    assert_eq!(run(&["simulate", "--chi", "0.5", "--cl", "0", "--cg", "0"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn omega_writes_the_cdf_and_honours_output() {
    let dir = tempfile::tempdir().unwrap();
    let cdf = dir.path().join("cdf.csv");
    let json_path = dir.path().join("omega.json");
    let out = run(&[
        "omega", "--chi", "0.6", "--cl", "1.7", "--cg", "1.7",
        "--dump-cdf", cdf.to_str().unwrap(), "-o", json_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(v["chi"].as_f64(), Some(0.6));
    let (header, rows) = csv_rows(&cdf);
    assert_eq!(header, ["beta", "cdf", "density"]);
    assert_eq!(rows.len(), 2048);
    let last: Vec<f64> = rows.last().unwrap().iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[1], 1.0);
}

#[test]
fn table1_reproduces_every_row() {
    let out = run(&["table1"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_from_stdout(&out);
    assert_eq!(header[..6], ["source_chi", "source_cl", "source_cg", "paper_omega", "computed_omega", "abs_dev"]);
    assert_eq!(rows.len(), 9);
    for row in rows {
        let dev: f64 = row[5].parse().unwrap();
        assert!(dev < 1e-3, "{row:?}");
    }
}

#[test]
fn grid_is_row_major_in_chi() {
    let out = run(&[
        "grid", "--chi-min", "-0.5", "--chi-max", "0.5", "--chi-count", "3",
        "--c-min", "0.5", "--c-max", "3.5", "--c-count", "3", COARSE[0], COARSE[1], COARSE[2], COARSE[3],
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_from_stdout(&out);
    assert_eq!(header, ["chi", "c", "omega", "error", "verdict", "diagnostic"]);
    assert_eq!(rows.len(), 9);
    let chis: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(chis, [-0.5, -0.5, -0.5, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5]);
    assert_eq!(rows[0][4], "Converges");
    assert_eq!(rows[2][4], "Diverges");
}

#[test]
fn boundary_at_zero_inertia() {
    let out = run(&["boundary", "--chi-min", "0", "--chi-max", "0", "--tol", "1e-6"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_from_stdout(&out);
    assert_eq!(header, ["chi", "c_star", "bracket_width", "trelea", "variance_bound", "status"]);
    assert_eq!(rows.len(), 1);
    let c_star: f64 = rows[0][1].parse().unwrap();
    assert!((c_star - 2.3195565).abs() < 1e-5, "{c_star}");
    assert_eq!(run(&["boundary", "--chi-min", "0.5", "--chi-max", "0.1"]).status.code(), Some(64));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("hist.csv");
    let args = [
        "simulate", "--chi", "-0.7", "--cl", "0.5", "--cg", "0.5", "--iterations", "200000", "--seed", "5",
        "--histogram", hist.to_str().unwrap(),
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["seed"].as_u64(), Some(5));
    assert_eq!(v["iterations_used"].as_u64(), Some(198_000));
    assert!(v["omega"].is_null());
    let (header, rows) = csv_rows(&hist);
    assert_eq!(header, ["bin_midpoint", "density"]);
    assert_eq!(rows.len(), 1000);
    let mass: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum::<f64>() * std::f64::consts::PI / 1000.0;
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_compares_with_the_computed_drift() {
    let out = run(&[
        "simulate", "--chi", "0.72984", "--cl", "1.496172", "--cg", "1.496172", "--seed", "9", "--compare",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["z_score"].as_f64().unwrap().abs() < 4.0, "{v}");
}

#[test]
fn jobs_flag_is_accepted() {
    let out = run(&["--jobs", "1", "omega", "--chi", "0", "--cl", "1", "--cg", "1"]);
    assert_eq!(out.status.code(), Some(0));
}
