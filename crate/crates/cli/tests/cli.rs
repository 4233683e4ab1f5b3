use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn theories() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../theories")
}

fn vlam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlam"))
        .args(args)
        .current_dir(theories())
        .output()
        .expect("run vlam")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Every JSON report has a string `status`; the remaining keys are checked
/// against the per-command shape.
fn report(args: &[&str], shape: &[(&str, fn(&Value) -> bool)]) -> (i32, Value) {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let o = vlam(&a);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)));
    assert!(v["status"].is_string(), "{v}");
    for (key, ok) in shape {
        assert!(ok(&v[*key]), "{key} in {v}");
    }
    let again: Value = serde_json::from_str(&v.to_string()).unwrap();
    assert_eq!(again, v);
    (code(&o), v)
}

#[test]
fn check_proves_the_wait_bound() {
    let o = vlam(&["check", "waits.thy", "x:X |- wait_2(x) ={3} wait_5(x)"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "PROVED\n");
}

#[test]
fn tighter_bound_is_unknown() {
    let o = vlam(&["check", "waits.thy", "x:X |- wait_2(x) ={1} wait_5(x)"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout(&o), "UNKNOWN\n");
}

#[test]
fn walk_bound_is_exact() {
    let o = vlam(&["bound", "probwalk.thy", "- |- walk1 ~ walk2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "1/5\n");
}

#[test]
fn trace_flag_dumps_the_proof() {
    let o = vlam(&["check", "waits.thy", "x:X |- wait_1(wait_1(x)) ={1} wait_3(x)", "--trace"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("PROVED\n("), "{s}");
    assert!(s.contains("axiom #"));
}

#[test]
fn json_reports_keep_exit_codes() {
    let (c, v) = report(
        &["check", "waits.thy", "x:X |- wait_2(x) ={3} wait_5(x)"],
        &[("label", Value::is_string), ("size", Value::is_u64)],
    );
    assert_eq!((c, v["status"].as_str()), (0, Some("proved")));
    let (c, v) = report(&["check", "waits.thy", "x:X |- wait_2(x) ={1} wait_5(x)"], &[("label", Value::is_string)]);
    assert_eq!((c, v["status"].as_str()), (1, Some("unknown")));
    let (c, v) = report(&["bound", "probwalk.thy", "- |- walk1 ~ walk2"], &[("label", Value::is_string)]);
    assert_eq!((c, v["label"].as_str()), (0, Some("1/5")));
    let (c, v) = report(
        &["model-check", "probwalk.thy", "probwalk.model"],
        &[("checked", Value::is_u64), ("failures", Value::is_array), ("skipped", Value::is_array)],
    );
    assert_eq!((c, v["checked"].as_u64()), (0, Some(121)));
    let (c, v) = report(&["check", "missing.thy", "x:X |- x ={0} x"], &[("error", Value::is_string)]);
    assert_eq!((c, v["status"].as_str()), (2, Some("error")));
}

#[test]
fn model_check_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("broken.model");
    let text = std::fs::read_to_string(theories().join("waits.model")).unwrap();
    std::fs::write(&model, format!("{text}op wait_1 = shift 2\n")).unwrap();
    let o = vlam(&["model-check", "waits.thy", model.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let s = stdout(&o);
    assert!(s.contains("FAIL #"), "{s}");
    assert!(s.lines().last().unwrap().starts_with("UNSATISFIED"));
    let o = vlam(&["model-check", "waits.thy", "waits.model"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn eval_prints_tables() {
    let o = vlam(&["eval", "waits.thy", "waits.model", "x:X |- wait_30(x)"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("  0 |-> 30\n") && s.contains("  5 |-> 32\n"), "{s}");
    let o = vlam(&["eval", "probwalk.thy", "probwalk.model", "- |- prob_3(*)"]);
    assert!(stdout(&o).contains("* |-> 1 e(3/10)"));
}

#[test]
fn typecheck_and_normalize() {
    let o = vlam(&["typecheck", "probwalk.thy"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("walk1 : Real ⊸ Real") || stdout(&o).contains("walk1 : Real -o Real"));
    let o = vlam(&["typecheck", "waits.thy", "x:X, y:X |- wait_1(x)"]);
    assert_eq!(code(&o), 2);
    let o = vlam(&["normalize", "waits.thy", "y:X |- (\\x:X. wait_1(x)) y"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "y:X |- wait_1(y) : X\n");
}

#[test]
fn quotient_of_a_pseudometric() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c.vcat");
    std::fs::write(&f, "points a b c\ndist a b = 0\ndist a c = 2\ndist b c = 2\n").unwrap();
    let o = vlam(&["quotient", f.to_str().unwrap(), "--quantale", "metric"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "[a] = {a, b}\n[c] = {c}\nd a c = 2\nd c a = 2\n");
    // without a quantale the file is rejected
    assert_eq!(code(&vlam(&["quotient", f.to_str().unwrap()])), 2);
    // a triangle-inequality violation is an input error
    std::fs::write(&f, "quantale metric\npoints a b c\ndist a b = 1\ndist b c = 1\ndist a c = 5\n").unwrap();
    assert_eq!(code(&vlam(&["quotient", f.to_str().unwrap()])), 2);
}

#[test]
fn input_errors_exit_two() {
    for args in [
        vec!["check", "waits.thy", "x:X |- wait_2(x) ~ wait_5(x)"],
        vec!["bound", "waits.thy", "x:X |- wait_2(x) ={1} wait_5(x)"],
        vec!["check", "waits.thy", "x:X |- wait_2(y) ={1} wait_5(x)"],
        vec!["check", "waits.thy", "x:X |- wait_2(x) ={3} wait_5(x)", "--quantale", "bool"],
        vec!["check", "waits.thy", "x:X |- wait_2(x) ={3} wait_5(x)", "--depth", "many"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&vlam(&args)), 2, "{args:?}");
    }
}

#[test]
fn depth_flag_limits_search() {
    // wait_1(wait_1(x)) ={0} wait_2(x) ={2} wait_4(x) needs trans over two axioms
    let pair = "x:X |- wait_1(wait_1(x)) ~ wait_4(x)";
    for (depth, label) in [("1", "inf\n"), ("2", "2\n"), ("3", "2\n")] {
        let o = vlam(&["bound", "waits.thy", pair, "--depth", depth]);
        assert_eq!((code(&o), stdout(&o).as_str()), (0, label), "depth {depth}");
    }
    let g = "x:X |- wait_1(wait_1(x)) ={2} wait_4(x)";
    assert_eq!(code(&vlam(&["check", "waits.thy", g, "--depth", "1"])), 1);
    assert_eq!(code(&vlam(&["check", "waits.thy", g])), 0);
}
