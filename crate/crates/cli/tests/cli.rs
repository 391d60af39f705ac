use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SUITES: [&str; 8] = [
    "scalar-duality",
    "em-duality",
    "boost-region",
    "mollifier",
    "schur",
    "huygens",
    "fock-ccr",
    "outer-regularity",
];

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duality-lab"))
        .args(args)
        .env_remove("DUALITY_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn empty_campaign_writes_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"name": "empty", "jobs": []}"#);
    let out = dir.path().join("out");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["total"], 0);
    assert_eq!(s["failed_jobs"], Value::Array(vec![]));
}

#[test]
fn failing_tolerance_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "strict", "jobs": [
            {"name": "too-strict", "module": "fock", "operation": "ccr", "tolerances": {"vacuum": 1e-30}},
            {"module": "fock", "operation": "commutant"}
        ]}"#,
    );
    let out = dir.path().join("out");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["failed_jobs"], serde_json::json!(["too-strict"]));
    assert_eq!(s["passed"], 1);
    let report = read_json(&out.join("jobs/00-too-strict.json"));
    assert_eq!(report["passed"], false);
    assert_eq!(report["tolerances"]["vacuum"], 1e-30);
}

#[test]
fn reports_are_reproducible_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "repeat", "seed": 7, "jobs": [
            {"module": "fock", "operation": "ccr"},
            {"module": "geometry", "operation": "conformal", "parameters": {"samples": 200}},
            {"module": "scalar_space", "operation": "outer-regularity", "parameters": {"sites": 16, "masses": [1.0]}, "schedule": [2, 1]}
        ]}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(lab(&["run", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(lab(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "3"]).status.code(), Some(0));
    for rel in [
        "summary.json",
        "jobs/00-fock-ccr.json",
        "jobs/01-geometry-conformal.json",
        "jobs/02-scalar_space-outer-regularity.json",
        "series/00-fock-ccr.csv",
    ] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn seed_override_changes_job_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"name": "s", "seed": 1, "jobs": [{"module": "fock", "operation": "ccr"}]}"#);
    let out = dir.path().join("out");
    assert_eq!(lab(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "40"]).status.code(), Some(0));
    assert_eq!(read_json(&out.join("jobs/00-fock-ccr.json"))["seed"], 40);
}

#[test]
fn list_suites_names_every_suite() {
    let o = lab(&["list-suites"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for s in SUITES {
        assert!(text.lines().any(|l| l.starts_with(s)), "{s}");
    }
}

#[test]
fn canned_suites_pass_validation() {
    let dir = tempfile::tempdir().unwrap();
    for s in SUITES {
        let o = lab(&["suite", s]);
        assert!(o.status.success(), "{s}");
        let cfg = write_config(dir.path(), &format!("{s}.json"), &String::from_utf8(o.stdout).unwrap());
        assert_eq!(lab(&["run", &cfg, "--dry-run"]).status.code(), Some(0), "{s}");
    }
}

#[test]
fn huygens_suite_is_massless_three_dimensional() {
    let c: Value = serde_json::from_slice(&lab(&["suite", "huygens"]).stdout).unwrap();
    let p = &c["jobs"][0]["parameters"];
    assert_eq!(p["dim"], 3);
    assert_eq!(p["mass"], 0.0);
}

#[test]
fn unknown_field_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        r#"{"name": "x", "jobz": []}"#,
        r#"{"name": "x", "jobs": [{"module": "fock", "operation": "ccr", "parameters": {"cutof": 3}}]}"#,
        r#"{"name": "x", "jobs": [{"module": "fock", "operation": "warp"}]}"#,
        r#"{"name": "x", "jobs": [{"module": "fock", "operation": "ccr", "tolerances": {"vacuum": -1}}]}"#,
        r#"{"name": "x", "jobs": [{"module": "propagator", "operation": "huygens", "schedule": [48]}]}"#,
    ] {
        let cfg = write_config(dir.path(), "c.json", text);
        let out = dir.path().join("never");
        let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!out.exists());
    }
}

#[test]
fn oversized_grid_is_refused_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "big", "jobs": [
            {"module": "fock", "operation": "ccr"},
            {"module": "propagator", "operation": "huygens", "schedule": [64, 256]}
        ]}"#,
    );
    let out = dir.path().join("never");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
    assert!(String::from_utf8(o.stderr).unwrap().contains("budget"));
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let from_config = dir.path().join("cfg");
    let from_env = dir.path().join("env");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"name": "p", "output_dir": {:?}, "jobs": []}}"#, from_config.to_str().unwrap()),
    );
    assert!(lab(&["run", &cfg]).status.success());
    assert!(from_config.join("summary.json").exists());
    let o = Command::new(env!("CARGO_BIN_EXE_duality-lab"))
        .args(["run", &cfg])
        .env("DUALITY_LAB_OUT", &from_env)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(from_env.join("summary.json").exists());
}

#[test]
fn schema_lists_every_operation() {
    let s: Value = serde_json::from_slice(&lab(&["schema"]).stdout).unwrap();
    let variants = s["properties"]["jobs"]["items"]["oneOf"].as_array().unwrap();
    assert_eq!(variants.len(), 17);
    let huygens = variants
        .iter()
        .find(|v| v["properties"]["operation"]["const"] == "huygens")
        .unwrap();
    assert_eq!(huygens["properties"]["parameters"]["properties"]["dim"]["default"], 3);
}
