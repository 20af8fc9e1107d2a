use std::path::Path;
use std::process::{Command, Output};

use jetvar::frontend::fixtures;

fn jetvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetvar")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn passing_fixture_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "wave.jv", fixtures::fixture("wave").unwrap());
    let o = jetvar(&["check", &f]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with(": PASS\n"));
}

#[test]
fn wrong_golden_exits_one_with_diff() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures::fixture("pkdv").unwrap().replace(
        "expect euler u = -u[tx] + 6*u[x]*u[xx] + u[xxxx]",
        "expect euler u = -u[tx] + 6*u[x]*u[xx] - u[xxxx]",
    );
    let f = write(dir.path(), "bad.jv", &src);
    let o = jetvar(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL    line 10: euler u"), "{out}");
    assert!(out.contains("expected: 6*u[x]*u[xx] - u[tx] - u[xxxx]\n"), "{out}");
    assert!(out.contains("actual: 6*u[x]*u[xx] - u[tx] + u[xxxx]\n"), "{out}");
}

#[test]
fn wrong_gauge_outcome_fails() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures::fixture("pkdv")
        .unwrap()
        .replace("expect gauge Self = false", "expect gauge Self = true");
    let f = write(dir.path(), "bad.jv", &src);
    let o = jetvar(&["gauge-check", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(
        out.contains("FAIL    line 24: gauge Self\n          expected: true\n            actual: false\n"),
        "{out}"
    );
}

#[test]
fn unresolved_constraint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let src: String = fixtures::fixture("maxwell")
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("resolve"))
        .map(|l| format!("{l}\n"))
        .collect();
    let f = write(dir.path(), "mx.jv", &src);
    let o = jetvar(&["check", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("REFUSED"));
}

#[test]
fn refusal_outranks_failure() {
    let dir = tempfile::tempdir().unwrap();
    let src: String = fixtures::fixture("maxwell")
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("resolve"))
        .map(|l| l.replace("expect euler F01 = 0", "expect euler F01 = 1") + "\n")
        .collect();
    let f = write(dir.path(), "mx.jv", &src);
    let o = jetvar(&["check", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn parse_errors_are_located() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "p.jv",
        "independents x y\ndependents u\nequation u[yy] = = u\n",
    );
    let o = jetvar(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("p.jv:3:"), "{err}");
    assert!(err.contains("expected"), "{err}");
}

#[test]
fn unknown_names_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.jv", "independents x\ndependents u\nlagrangian w[x]^2\n");
    let o = jetvar(&["euler", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("3:"));
}

#[test]
fn missing_file_fails() {
    let o = jetvar(&["check", "/nonexistent/file.jv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn json_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "laplace.jv", fixtures::fixture("laplace").unwrap());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(
        jetvar(&["--out", a.to_str().unwrap(), "check", &f]).status.code(),
        Some(0)
    );
    assert_eq!(
        jetvar(&["check", &f, "--out", b.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let (ja, jb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ja, jb);
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["status"], "pass");
    assert_eq!(v["summary"]["fail"], 0);
    assert!(v["checks"].as_array().unwrap().len() >= 20);
}

#[test]
fn reproduce_all_runs_every_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("all.json");
    let o = jetvar(&["reproduce", "all", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let sources: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["source"].as_str().unwrap())
        .collect();
    assert_eq!(sources, ["laplace.jv", "wave.jv", "pkdv.jv", "maxwell.jv"]);
}

#[test]
fn reproduce_unknown_lists_names() {
    let o = jetvar(&["reproduce", "heat"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    for name in ["laplace", "wave", "pkdv", "maxwell"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn text_commands() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "laplace.jv", fixtures::fixture("laplace").unwrap());
    let o = jetvar(&["euler", &f]);
    assert_eq!(stdout(&o), "euler u = u[xx] + u[yy]\n");
    let o = jetvar(&["prolong", &f, "--order", "3"]);
    assert!(stdout(&o).contains("u[yyy] = -u[xxy]"));
    let o = jetvar(&["internal-lagrangian", &f]);
    assert!(stdout(&o).contains("omega_L = "));
    let o = jetvar(&["presymplectic", &f]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("omega = "));
}

#[test]
fn opaque_lagrangian_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "o.jv",
        "independents x\ndependents u\nopaque f(u[x])\nlagrangian f\n",
    );
    let o = jetvar(&["euler", &f]);
    assert_eq!(o.status.code(), Some(2));
}
