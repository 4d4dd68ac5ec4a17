use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thetadiv"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thetadiv-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn curve_file(name: &str, coeffs: &str) -> PathBuf {
    let path = scratch(name).join("curve.json");
    std::fs::write(&path, format!("{{\"f_coeffs\": {coeffs}}}")).unwrap();
    path
}

fn x5_minus_x() -> PathBuf {
    curve_file("x5", "[[0,0],[-1,0],[0,0],[0,0],[0,0],[1,0]]")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn theta_genus_one_matches_jacobi_series() {
    let out = run(bin().args(["theta", "--g", "1", "--tau", "i", "--z", "0"]));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    // theta_3(0 | i) = pi^{1/4} / Gamma(3/4)
    let expected = std::f64::consts::PI.powf(0.25) / 1.225_416_702_465_177_6;
    let re = v["value"][0].as_f64().unwrap();
    assert!((re - expected).abs() < 1e-12, "{re} vs {expected}");
    assert!(v["value"][1].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn theta_diagonal_factorizes() {
    let one = |t: &str| {
        let v = json(&run(bin().args(["theta", "--g", "1", "--tau", t, "--z", "0.1+0.2i"])));
        num(&v["value"])
    };
    let v = json(&run(bin().args(["theta", "--g", "2", "--tau", "diag(i,2i)", "--z", "0.1+0.2i,0.1+0.2i"])));
    let prod = mul(one("i"), one("2i"));
    let two = num(&v["value"]);
    assert!((two.0 - prod.0).abs() < 1e-12 && (two.1 - prod.1).abs() < 1e-12);
}

fn num(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

#[test]
fn input_errors_exit_two() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["theta", "--g", "2", "--tau", "i,0.5,0,i", "--z", "0,0"],
        vec!["theta", "--g", "1", "--tau", "-i", "--z", "0"],
        vec!["theta", "--g", "1", "--tau", "i", "--z", "0", "--eps", "1e-20"],
        vec!["theta", "--g", "2", "--tau", "diag(i,i)", "--z", "0"],
        vec!["theta", "--g", "1", "--tau", "i", "--z", "zero"],
    ];
    for args in cases {
        let out = run(bin().args(&args));
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn bad_curves_exit_two() {
    let repeated = curve_file("rep", "[[0,0],[0,0],[0,0],[0,0],[0,0],[1,0]]");
    let quartic = curve_file("quartic", "[[1,0],[0,0],[0,0],[0,0],[1,0]]");
    let missing = scratch("missing").join("nope.json");
    for path in [repeated, quartic, missing] {
        let out = run(bin().arg("curve").arg(&path));
        assert_eq!(out.status.code(), Some(2), "{}", path.display());
    }
}

#[test]
fn curve_reports_symmetric_periods_and_refinement() {
    let out = run(bin().arg("curve").arg(x5_minus_x()).arg("--refine"));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["tau_asymmetry"].as_f64().unwrap() < 1e-10);
    assert!(v["im_tau_min_eigenvalue"].as_f64().unwrap() > 0.0);
    assert_eq!(v["refinement"]["passed"], Value::Bool(true));
    assert_eq!(v["summary"]["branch_points"].as_array().unwrap().len(), 5);
}

#[test]
fn eta_vanishes_for_decomposable_tau() {
    // a point of the theta divisor of diag(i, 2i): z_1 at the odd half period of the first factor
    let out = run(bin().args(["eta", "--g", "2", "--tau", "diag(i,2i)", "--z", "0.5+0.5i,0.3+0.1i"]));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["theta_residual"].as_f64().unwrap() < 1e-12);
    assert!(v["eta_norm"].as_f64().unwrap() < 1e-8);
}

#[test]
fn verify_is_deterministic_and_complete() {
    let curve = x5_minus_x();
    let dirs = [scratch("verify-a"), scratch("verify-b")];
    for dir in &dirs {
        let out = run(bin()
            .arg("verify")
            .arg(&curve)
            .args(["--samples", "2", "--nodes", "1000", "--seed", "3", "--out"])
            .arg(dir));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dirs[0].join("report.json")).unwrap();
    let b = std::fs::read(dirs[1].join("report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dirs[0].join("residuals.csv")).unwrap(),
        std::fs::read(dirs[1].join("residuals.csv")).unwrap()
    );

    let report: Value = serde_json::from_slice(&a).unwrap();
    let keys: Vec<&str> = report.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["config", "curve", "invariants", "suites", "passed", "failed_stage", "error"]);
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["config"]["seed"], 3);
    let suites = report["suites"].as_array().unwrap();
    let names: Vec<&str> = suites.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "main_theorem",
            "wronskian_lemma",
            "lambda_constancy",
            "green_normalization",
            "bost_crosscheck",
            "delta_spread"
        ]
    );
    assert_eq!(suites[0]["rows"].as_array().unwrap().len(), 2);

    let csv = std::fs::read_to_string(dirs[0].join("residuals.csv")).unwrap();
    assert!(csv.starts_with("suite,label,x_re,x_im,lhs,rhs,residual"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("main_theorem,")).count(), 2);

    let timings: Value = serde_json::from_slice(&std::fs::read(dirs[0].join("timings.json")).unwrap()).unwrap();
    assert!(!timings["stages"].as_array().unwrap().is_empty());
}

#[test]
fn verify_rejects_bad_config() {
    let curve = x5_minus_x();
    let out = run(bin().arg("verify").arg(&curve).args(["--samples", "0"]));
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(false));
    assert_eq!(report["failed_stage"], "config");
}
