use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spherica"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spherica-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(s.lines().count(), 1, "stderr: {s}");
    s.trim_end().to_string()
}

#[test]
fn eval_spherical_j0() {
    let v = json(&run(&["eval-spherical", "--x", "1", "--xi", "1"]));
    assert!((v["value"].as_f64().unwrap() - 0.7651976866).abs() < 1e-10);
    assert_eq!(v["path"], "determinant");
}

#[test]
fn eval_spherical_degenerate_det() {
    let o = run(&["eval-spherical", "--x", "1,1", "--xi", "1,1", "--path", "det"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).starts_with("error: kind=degeneracy message="));
}

#[test]
fn eval_spherical_zero_point() {
    let v = json(&run(&["eval-spherical", "--x", "0,0", "--xi", "3,4"]));
    assert_eq!(v["value"].as_f64(), Some(1.0));
}

#[test]
fn malformed_input_exits_1() {
    for args in [
        &["eval-spherical", "--x", "1,x", "--xi", "1"][..],
        &["eval-spherical", "--x", "1,2", "--xi", "1"],
        &["eval-spherical", "--xi", "1"],
        &["no-such-command"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr_line(&o).starts_with("error: kind="));
    }
}

#[test]
fn eval_polya_examples() {
    let w = scratch("w4.json", r#"{"alpha":[4],"gamma":0}"#);
    let w = w.to_str().unwrap();
    let v = json(&run(&["eval-polya", "--omega", w, "--lambda", "1"]));
    assert_eq!(v["values"][0].as_f64(), Some(0.5));
    let v = json(&run(&["eval-polya", "--omega", w, "--lambda", "1,1"]));
    assert_eq!(v["product"].as_f64(), Some(0.25));

    let bad = scratch("bad.json", r#"{"alpha":[1],"gamma":-1}"#);
    let o = run(&["eval-polya", "--omega", bad.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_line(&o).starts_with("error: kind=validation"));

    let junk = scratch("junk.json", r#"{"alpha": "x"}"#);
    let o = run(&["eval-polya", "--omega", junk.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_line(&o).starts_with("error: kind=schema"));
}

#[test]
fn eval_mixture_value() {
    let m = scratch(
        "mix.json",
        r#"{"components":[{"weight":0.5,"omega":{"alpha":[4],"gamma":0}},{"weight":0.5,"omega":{"alpha":[],"gamma":0}}]}"#,
    );
    let v = json(&run(&["eval-mixture", "--mixture", m.to_str().unwrap(), "--xi", "1"]));
    assert_eq!(v["value"].as_f64(), Some(0.75));
}

#[test]
fn orbital_and_heat_kernel() {
    let v = json(&run(&["orbital", "--lambda", "1", "--theta", "2"]));
    assert!((v["value"].as_f64().unwrap() - 2.2795853023360673).abs() < 1e-13);
    let v = json(&run(&["orbital", "--lambda", "1,2", "--theta", "0,0"]));
    assert_eq!(v["value"].as_f64(), Some(1.0));
    let v = json(&run(&["heat-kernel", "--t", "0.5", "--lambda", "1", "--theta", "1"]));
    assert!((v["value"].as_f64().unwrap() - 0.4657596075936404).abs() < 1e-15);
    let o = run(&["heat-kernel", "--t", "0", "--lambda", "1", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn laplacian_check_agrees() {
    let v = json(&run(&["laplacian-check", "--lambda", "1,0.5"]));
    assert!(v["rel_radial"].as_f64().unwrap() < 1e-6);
    assert!(v["rel_ambient"].as_f64().unwrap() < 1e-4);
    let o = run(&["laplacian-check", "--lambda", "1,0"]);
    assert_eq!(o.status.code(), Some(2));
}

fn csv_column(out: &[u8], col: &str) -> Vec<f64> {
    let s = String::from_utf8(out.to_vec()).unwrap();
    let mut lines = s.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn spherical_sweep_csv() {
    let w = scratch("atom.json", r#"{"alpha":[1],"gamma":0}"#);
    let o = run(&[
        "sweep", "--kind", "spherical", "--omega", w.to_str().unwrap(), "--xi", "1", "--n", "25,50,100,200", "--format",
        "csv",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.starts_with(b"n,value,limit,abs_error,std_error\n"));
    let e = csv_column(&o.stdout, "abs_error");
    assert!(e.windows(2).all(|p| p[1] < p[0]));
    assert!(e[3] <= 0.02);
}

#[test]
fn powersum_sweep_is_one_over_n() {
    let w = scratch("gauss.json", r#"{"alpha":[],"gamma":1}"#);
    let o = run(&[
        "sweep", "--kind", "powersum", "--omega", w.to_str().unwrap(), "--m", "2", "--n", "10,100,1000", "--format",
        "csv",
    ]);
    for (e, n) in csv_column(&o.stdout, "abs_error").iter().zip([10.0, 100.0, 1000.0]) {
        assert!(((e - 1.0 / n) * n).abs() < 1e-14);
    }
}

#[test]
fn weyl_sweep_decreases() {
    let o = run(&["sweep", "--kind", "weyl", "--m", "1", "--f", "cos2", "--n", "2,4,8,16", "--format", "csv"]);
    let v = csv_column(&o.stdout, "value");
    assert!(v.windows(2).all(|p| p[1] < p[0]), "{v:?}");
}

#[test]
fn sweep_errors_exit_2() {
    let w = scratch("atom2.json", r#"{"alpha":[1],"gamma":0}"#);
    let o = run(&["sweep", "--kind", "spherical", "--omega", w.to_str().unwrap(), "--xi", "1,1,1", "--n", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_special_passes() {
    let o = run(&["validate", "--suite", "special"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.lines().skip(1).filter(|l| l.starts_with("special")).all(|l| l.contains(" PASS ")));
    assert!(s.ends_with("failed=0\n"));
}

#[test]
fn validate_mc_is_deterministic() {
    let args = ["validate", "--suite", "mc", "--samples", "100000", "--seed", "7"];
    let a = run(&args);
    let b = bin().args(args).env("RAYON_NUM_THREADS", "3").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validate_all_exits_0() {
    assert!(run(&["validate", "--suite", "all"]).status.success());
}

#[test]
fn out_file_and_seed_reproducibility() {
    let dir = std::env::temp_dir().join(format!("spherica-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for p in [&a, &b] {
        let o = run(&[
            "eval-spherical", "--x", "1,2", "--xi", "0.5,1.5", "--path", "mc", "--samples", "20000", "--seed", "3", "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success() && o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_precedence() {
    let cfg = scratch("cfg.json", r#"{"x": [5], "xi": [1], "format": "csv"}"#);
    let o = run(&["eval-spherical", "--x", "1", "--config", cfg.to_str().unwrap()]);
    let v = csv_column(&o.stdout, "value");
    assert!((v[0] - 0.7651976866).abs() < 1e-10);
}
