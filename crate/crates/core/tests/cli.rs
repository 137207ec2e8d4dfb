use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn varinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varinf"))
        .args(args)
        .env_remove("VARINF_OUT")
        .output()
        .expect("spawn varinf")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("varinf-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(varinf(&["--help"]).status.code(), Some(0));
    assert_eq!(varinf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(varinf(&["lambda"]).status.code(), Some(2));
    let out = varinf(&["lambda", "--fixture", "no-such-fixture"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_errors_point_at_the_source() {
    let d = scratch("parse");
    let f = d.join("bad.fam");
    std::fs::write(&f, "t1 := (abs 0)\nt2 := (abs\n").unwrap();
    let out = varinf(&["lambda", "--family", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{}:2:", f.display())), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn eval_reports_values_and_config() {
    let out = varinf(&["eval", "--expr", "(abs 0)", "--at", "2", "--at", "-3"]);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["tool"], "varinf");
    assert_eq!(r["config"]["command"], "eval");
    assert_eq!(r["result"][0]["values"][0]["value"], 2.0);
    assert_eq!(r["result"][1]["values"][0]["value"], 3.0);
}

#[test]
fn upper_sum_of_fixture() {
    let out = varinf(&["sum", "--fixture", "abs-pair", "--at", "0.25"]);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["config"]["family_name"], "abs-pair");
    assert_eq!(r["result"][0]["value"], 1.0);
}

#[test]
fn out_dir_gets_report_and_traces() {
    let d = scratch("out");
    let out = varinf(&["--out", d.to_str().unwrap(), "lambda", "--fixture", "abs-pair", "--seed", "3"]);
    assert!(out.status.success());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(d.join("lambda.json")).unwrap()).unwrap();
    assert_eq!(written["result"], json(&out)["result"]);
    let csv = std::fs::read_to_string(d.join("lambda.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("quantity,s_size,delta,value"));
    assert!(lines.all(|l| l.starts_with("lambda,")));
}

#[test]
fn same_seed_same_report_across_thread_counts() {
    let run = |threads: &str| {
        let out = varinf(&["--seed", "11", "--threads", threads, "theta", "--fixture", "quad-abs"]);
        assert!(out.status.success());
        let mut v = json(&out);
        v.as_object_mut().unwrap().remove("generated_at");
        v
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn strict_turns_failed_certificate_into_exit_one() {
    let plain = varinf(&["certify", "firm-uniform-lsc", "--fixture", "nonfirm-r3-pair"]);
    assert_eq!(plain.status.code(), Some(0));
    assert_eq!(json(&plain)["result"]["verdict"]["verdict"], "fails");
    let strict = varinf(&["certify", "firm-uniform-lsc", "--fixture", "nonfirm-r3-pair", "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn sum_rule_refuses_a_non_subgradient() {
    let out = varinf(&["sumrule", "--fixture", "abs-pair", "--at", "0", "--xstar", "1.5", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subgradient"));

    let ok = varinf(&["sumrule", "--fixture", "abs-twin", "--at", "0", "--xstar", "1.5", "--eps", "0.1"]);
    assert!(ok.status.success());
    assert_eq!(json(&ok)["result"]["dual_residual"], 0.0);
}

#[test]
fn dimension_mismatch_is_a_usage_error() {
    let out = varinf(&["sum", "--fixture", "abs-pair", "--at", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
}
