use std::fs;
use std::process::{Command, Output};

use circle_ot::experiments::Report;

fn circle_ot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circle-ot"))
        .args(args)
        .env_remove("CIRCLE_OT_N")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn antipodal_diracs() {
    let o = circle_ot(&["wasserstein", "--mu", "dirac:0", "--nu", "dirac:0.5", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("W_2 = 0.5"), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn counterexample_report_meets_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ce.json");
    let o = circle_ot(&["counterexample", "--k", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert!(r.samples["distance"].as_f64().unwrap() >= 1.0 / 64.0);
    assert_eq!(r.params["k"], 4);
}

#[test]
fn derivative_check_passes_on_the_model_map() {
    let o = circle_ot(&["derivative-check", "--map", "d=2,eps=0", "--field", "sin:3", "--t", "1e-1:1e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("derivative-check: pass"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = circle_ot(&["mdim", "--k", "3", "--steps", "2", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.to_str().unwrap();
    assert_eq!(circle_ot(&["counterexample", "--k", "8", "--n", "1024", "--out", p]).status.code(), Some(0));
    assert_eq!(circle_ot(&["--verify", p]).status.code(), Some(0));
    let mut r = Report::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    r.samples["distance"] = serde_json::json!(0.0);
    fs::write(&path, r.to_json().unwrap()).unwrap();
    let o = circle_ot(&["--verify", p]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn csv_output_lists_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let args = ["derivative-check", "--field", "cos:1", "--map", "d=2,eps=0.2", "--n", "1024"];
    let o = circle_ot(&[&args[..], &["--format", "csv", "--out", path.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("series,t,distance\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("control,")).count(), 4);
}

#[test]
fn failing_scan_exits_two() {
    let o = circle_ot(&["atoms", "--field", "saw", "--t", "0.5,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("atoms: fail"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["bogus"][..],
        &["wasserstein", "--mu", "gauss", "--nu", "uniform"],
        &["counterexample", "--map", "d=1"],
        &["derivative-check", "--field", "cos:1", "--t", "1e-1,1e-2"],
        &["--verify", "/nonexistent/report.json"],
    ] {
        assert_eq!(circle_ot(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn resolution_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let o = Command::new(env!("CARGO_BIN_EXE_circle-ot"))
        .args(["cantor", "--depth", "3", "--t-count", "20", "--out", path.to_str().unwrap()])
        .env("CIRCLE_OT_N", "512")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r = Report::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r.params["n"], 512);
}
