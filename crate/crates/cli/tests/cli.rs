use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mateq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mateq")).args(args).output().expect("spawn mateq")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_line(out: &Output) -> String {
    let s = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(s.trim_end().lines().count(), 1, "stderr: {s}");
    s
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn m(rows: usize, cols: usize, data: &[f64]) -> String {
    format!(r#"{{"rows":{rows},"cols":{cols},"data":{data:?}}}"#)
}

#[test]
fn solve_scalar_csylv() {
    let dir = tempfile::tempdir().unwrap();
    let one = m(1, 1, &[1.0]);
    let spec = write(
        dir.path(),
        "s.json",
        &format!(r#"{{"kind":"csylv","A":{one},"B":{one},"C":{}}}"#, m(1, 1, &[-2.0])),
    );
    let out = mateq(&["solve", "--spec", &spec]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["P"]["data"][0].as_f64().unwrap(), 1.0);
    assert!(out.stderr.is_empty());
}

#[test]
fn solve_example_dare() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "d.json",
        &format!(
            r#"{{"kind":"dare","A":{},"B":{},"Q":{},"R":{}}}"#,
            m(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            m(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            m(2, 2, &[0.1, 0.0, 0.0, 0.3])
        ),
    );
    let target = dir.path().join("out.json");
    let out = mateq(&["solve", "--spec", &spec, "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(target).unwrap()).unwrap();
    let residual = v["residual"].as_f64().unwrap();
    let scale = v["scale"].as_f64().unwrap();
    assert!(residual <= 1e-10 * scale);
    assert!(v.get("K").is_some() && v.get("A_tilde").is_some());
}

#[test]
fn solve_missing_r_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let one = m(1, 1, &[1.0]);
    let spec = write(dir.path(), "d.json", &format!(r#"{{"kind":"dare","A":{one},"B":{one},"Q":{one}}}"#));
    let out = mateq(&["solve", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains('R'));
    assert!(out.stdout.is_empty());
}

#[test]
fn solve_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mateq(&["solve", "--spec", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);

    let bad = write(dir.path(), "bad.json", "{not json");
    assert_eq!(mateq(&["solve", "--spec", &bad]).status.code(), Some(1));

    // a + b = 0: no unique solution.
    let spec = write(
        dir.path(),
        "sing.json",
        &format!(
            r#"{{"kind":"csylv","A":{},"B":{},"C":{}}}"#,
            m(1, 1, &[1.0]),
            m(1, 1, &[-1.0]),
            m(1, 1, &[1.0])
        ),
    );
    let out = mateq(&["solve", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
    stderr_line(&out);
}

#[test]
fn gradcheck_pass_fail_vacuous() {
    let out = mateq(&["gradcheck", "--kind", "dare", "--n", "3", "--m", "2", "--trials", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["passed"], true);

    let out = mateq(&["gradcheck", "--kind", "clyap", "--n", "2", "--trials", "3", "--tol", "0"]);
    assert!(!out.status.success());
    assert_eq!(stdout_json(&out)["passed"], false);
    stderr_line(&out);

    let out = mateq(&["gradcheck", "--kind", "care", "--n", "2", "--trials", "0"]);
    assert!(out.status.success());

    let out = mateq(&["gradcheck", "--kind", "nope", "--n", "2"]);
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);
}

#[test]
fn inverse_lqr_default_recovers_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("trace{i}.csv"));
        let q = dir.path().join(format!("q{i}.json"));
        let out = mateq(&[
            "inverse-lqr",
            "--out-trace",
            trace.to_str().unwrap(),
            "--out-q",
            q.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        assert!(v["recovery_error"].as_f64().unwrap() <= 5e-2);
        runs.push((fs::read(trace).unwrap(), fs::read(q).unwrap(), out.stdout));
    }
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0].0.clone()).unwrap();
    assert!(csv.starts_with("iter,loss,q_norm,grad_norm,step\n"));
}

#[test]
fn inverse_lqr_no_iterations_reports_initial_point() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = mateq(&["inverse-lqr", "--max-iters", "0", "--out-trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["Q_hat"]["data"], serde_json::json!([1.0, 0.0, 0.0, 1.0]));
    let csv = fs::read_to_string(trace).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn inverse_lqr_underdetermined_trace_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = mateq(&["inverse-lqr", "--K", "1", "--T", "2", "--out-trace", trace.to_str().unwrap()]);
    assert!(out.status.code().is_some());
    let csv = fs::read_to_string(trace).unwrap();
    let mut prev = None;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let iter: usize = fields[0].parse().unwrap();
        assert!(prev.is_none_or(|p| iter > p));
        prev = Some(iter);
        assert!(fields[1].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn inverse_lqr_custom_spec_validated() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "lqr.json",
        &format!(
            r#"{{"A":{},"B":{},"Q":{},"R":{}}}"#,
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[-1.0])
        ),
    );
    let out = mateq(&["inverse-lqr", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);
}
