use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_et-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The pretty-printed JSON object at the start of stdout.
fn json_head(o: &Output) -> Value {
    let text = stdout(o);
    let end = text.find("\n}").map(|i| i + 2).unwrap_or(text.len());
    serde_json::from_str(&text[..end]).unwrap()
}

#[test]
fn check_poly_root_form() {
    let f = tmp("z_minus_one_8.json");
    fs::write(&f, r#"{"roots":[[1,0],[1,0],[1,0],[1,0],[1,0],[1,0],[1,0],[1,0]]}"#).unwrap();
    let o = run(&["check-poly", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert!((v["D"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["H"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
    assert_eq!(v["holds"], Value::Bool(true));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.starts_with("D=1.00000 H=0.693147 bound=1.17741"), "{last}");
}

#[test]
fn check_poly_coefficient_form() {
    let f = tmp("z8_minus_one.json");
    fs::write(&f, r#"{"coeffs":[[-1,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[1,0]]}"#).unwrap();
    let o = run(&["check-poly", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert!((v["D"].as_f64().unwrap() - 0.125).abs() < 1e-9);
    assert!((v["H"].as_f64().unwrap() - 2f64.ln() / 8.0).abs() < 1e-9);
}

#[test]
fn bad_input_exits_two() {
    let f = tmp("broken.json");
    fs::write(&f, r#"{"roots":[[1,0]], "coeffs":[[1,0]]}"#).unwrap();
    assert_eq!(run(&["check-poly", f.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["check-poly", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(run(&["sharpness", "--m", "0.7", "--n", "8", "--q", "8"]).status.code(), Some(2));
    assert_eq!(run(&["extremal", "--kind", "4"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("check-poly"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn table1_is_deterministic() {
    let a = run(&["table1"]);
    assert_eq!(a.status.code(), Some(0));
    let f = tmp("table1.csv");
    let b = run(&["table1", "--out", f.to_str().unwrap()]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, fs::read(&f).unwrap());
    let c = bin().env("ET_LAB_THREADS", "1").arg("table1").output().unwrap();
    assert_eq!(a.stdout, c.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().nth(1).unwrap().starts_with("0,1.10000,0.098"));
}

#[test]
fn phi_values() {
    let o = run(&["phi", "--L", "0", "--R", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.882907).abs() < 1e-6);
    let o = run(&["--precision", "10", "phi", "--L", "0.9", "--R", "1.05"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v + 0.2432840603).abs() < 1e-9);
}

#[test]
fn extremal_families() {
    let o = run(&["extremal", "--kind", "2", "--R", "2"]);
    let v = json_head(&o);
    assert!((v["H_tilde"].as_f64().unwrap() - std::f64::consts::PI.powi(2)).abs() < 1e-10);
    let dens = tmp("kind1.csv");
    let meas = tmp("kind1.json");
    let o = run(&[
        "extremal",
        "--kind",
        "1",
        "--m",
        "0.2",
        "--emit-density",
        dens.to_str().unwrap(),
        "--emit-measure",
        meas.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert!((v["D"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(fs::read_to_string(&dens).unwrap().lines().count(), 1025);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&meas).unwrap()).unwrap();
    assert!(doc.get("diracs").is_some());

    let o = run(&["ganelius", meas.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_head(&o)["holds"], Value::Bool(true));
}

#[test]
fn periodize_identity() {
    let meas = tmp("periodized.json");
    let o = run(&["periodize", "--R", "2", "--lambda", "0.1", "--emit-measure", meas.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    let h = v["H"].as_f64().unwrap();
    let ht = v["H_tilde"].as_f64().unwrap();
    assert!((h - ht).abs() <= 1e-3, "{h} vs {ht}");
    assert!(fs::read_to_string(&meas).unwrap().contains("periodized"));
}

#[test]
fn simulate_writes_trace_and_density() {
    let sc = tmp("scenario.json");
    fs::write(&sc, r#"{"M":0,"m":0.2,"mass":0.6,"n_cells":128,"iters":20000,"tol":1e-3}"#).unwrap();
    let trace = tmp("trace.csv");
    let dens = tmp("density.csv");
    let o = run(&[
        "simulate",
        sc.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--density",
        dens.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert_eq!(v["converged"], Value::Bool(true));
    assert!(fs::read_to_string(&trace).unwrap().starts_with("iteration,energy,residual\n"));
    assert_eq!(fs::read_to_string(&dens).unwrap().lines().count(), 129);
}

#[test]
fn sharpness_with_polynomial() {
    let o = run(&["sharpness", "--m", "0.1", "--n", "256", "--q", "256", "--poly"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert!(v["continuum"]["G"].as_f64().unwrap() > 0.5);
    assert_eq!(v["polynomial"]["holds"], Value::Bool(true));
}

#[test]
fn ganelius_corpus_is_seeded() {
    let a = run(&["--seed", "7", "ganelius", "--corpus", "20", "--grid", "1024"]);
    let b = run(&["--seed", "7", "ganelius", "--corpus", "20", "--grid", "1024"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_head(&a);
    assert_eq!(v["holds"].as_u64(), Some(20));
    assert_eq!(run(&["ganelius"]).status.code(), Some(2));
}
