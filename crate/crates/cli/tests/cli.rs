use std::process::{Command, Output};

fn qetlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qetlab")).args(args).env_remove("QETLAB_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

#[test]
fn compare_cointoss_passes() {
    let o = qetlab(&["--json", "compare", "corpus:cointoss.aql", "--depth", "40", "--budget", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v[0]["gap"].as_f64().unwrap() < 1e-6);
    assert!((v[0]["denotational"].as_f64().unwrap() - 1.5).abs() < 1e-6);
}

#[test]
fn clone_is_rejected() {
    let o = qetlab(&["--json", "check", "corpus:clone.aql"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["errors"][0]["kind"], "LinearityViolation");
    assert!(v["errors"][0]["rule"].is_string());
}

#[test]
fn check_with_type_override() {
    let o = qetlab(&["check", "corpus:cointoss.aql", "--type", "Q"]);
    assert_eq!(o.status.code(), Some(0));
    let o = qetlab(&["check", "corpus:cointoss.aql", "--type", "Out"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_bound_verdicts() {
    let o = qetlab(&["--json", "verify-bound", "corpus:ecost.csl", "--type", "corpus:ecost.rty"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["report"]["verdict"]["NotFalsified"], 1000);

    let o = qetlab(&["--json", "verify-bound", "corpus:ecost.csl", "--type", "corpus:ecost_weak.rty"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["falsified"], true);
    assert_eq!(v["witness_replays"], true);
}

#[test]
fn seed_flag_and_env_agree() {
    let a = qetlab(&["--json", "sample", "corpus:cointoss.aql", "--trials", "300", "--seed", "11"]);
    let b = Command::new(env!("CARGO_BIN_EXE_qetlab"))
        .args(["--json", "sample", "corpus:cointoss.aql", "--trials", "300"])
        .env("QETLAB_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn json_output_is_byte_stable() {
    for args in [
        &["--json", "verify-bound", "corpus:ecost.csl", "--type", "corpus:ecost_weak.rty"][..],
        &["--json", "run", "corpus:cointoss.aql", "--depth", "12"][..],
        &["--json", "sample", "corpus:qwalk_h.aql", "--trials", "200", "--seed", "3"][..],
    ] {
        assert_eq!(stdout(&qetlab(args)), stdout(&qetlab(args)));
    }
}

#[test]
fn transform_then_denote_round_trip() {
    let dir = std::env::temp_dir().join(format!("qetlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("cointoss.csl");
    let o = qetlab(&["transform", "corpus:cointoss.aql", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = qetlab(&["--json", "denote", out.to_str().unwrap(), "--budget", "64"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["value"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn denote_applies_function() {
    let o = qetlab(&["--json", "denote", "corpus:ecost.csl", "--apply", "ket[|1>]"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["value"].as_f64().unwrap() - 3.0).abs() < 1e-6);
}

#[test]
fn grover_error_over_unit_interval() {
    let o = qetlab(&["--json", "compare", "corpus:grover2.aql", "--continuation", "corpus:grover2_err.csl"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v[1]["observable"], "ExpectedValue");
    assert!(v[1]["denotational"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qetlab(&["run", "corpus:cointoss.aql", "--depth", "0"]).status.code(), Some(2));
    assert_eq!(qetlab(&["compare", "corpus:cointoss.aql", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(qetlab(&["check", "/nonexistent/file.aql"]).status.code(), Some(2));
    assert_eq!(qetlab(&["frobnicate"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_qetlab"))
        .args(["sample", "corpus:cointoss.aql"])
        .env("QETLAB_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corpus_verifies() {
    let o = qetlab(&["--json", "corpus", "--jobs", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json(&o);
    assert!(v.as_array().unwrap().len() >= 11);
    let o = qetlab(&["corpus", "--show", "cointoss.aql"]);
    assert!(stdout(&o).contains("letrec cointoss"));
}
