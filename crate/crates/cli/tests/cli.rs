use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    dnlab(&args)
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(config: &Path, extra: &[&str]) -> (i32, Vec<String>) {
    let mut args = vec!["validate", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = dnlab(&args);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let errors = report["errors"].as_array().unwrap().iter().map(|e| e.as_str().unwrap().to_string()).collect();
    (out.status.code().unwrap(), errors)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const CGO: &str = r#"{"kind": "cgo_check", "p": 3, "n": 3, "xi": [1, 0, 0], "t": 2, "random_frames": 20}"#;

#[test]
fn worked_cgo_frame() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cgo.json", CGO);
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let frame = json_file(&dir.path().join("out/frame.json"));
    assert!((frame["s"].as_f64().unwrap() - 2.5f64.sqrt()).abs() <= 1e-14);
    assert!(frame["null_residual"].as_f64().unwrap() <= 1e-13);
    assert_eq!(frame["kind"], "cgo_check");
    let manifest = json_file(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["status"], "pass");
    assert_eq!(manifest["files"], serde_json::json!(["frame.json", "random_frames.csv"]));
    assert_eq!(manifest["config"]["random_frames"], 20);
    let csv = fs::read_to_string(dir.path().join("out/random_frames.csv")).unwrap();
    assert!(csv.starts_with("# kind=cgo_check, anchor="));
    assert_eq!(csv.lines().count(), 2 + 20);
}

#[test]
fn asymptotics_without_potential_reports_no_correction() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "asym.json",
        r#"{"kind": "asymptotics", "mesh": {"subdivisions": 6}, "p": 3, "m": 4, "potential": "0",
            "base": "1 + x1 + 0.5*x2", "test": "1 + x1^2 + x2", "solver": {"grad_tol": 1e-12}}"#,
    );
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = json_file(&dir.path().join("out/summary.json"));
    assert_eq!(summary["status"], "no correction detectable");
    assert_eq!(summary["correction"], Value::Null);
    let csv = fs::read_to_string(dir.path().join("out/asymptotics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap() == "lambda,pairing,remainder,R_error_value,R_error_gradient");
}

#[test]
fn missing_p_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"kind": "cgo_check", "n": 3, "xi": [1, 0, 0], "t": 2}"#);
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p: missing required field"), "{}", stderr(&out));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn p_equal_two_needs_the_sanity_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"kind": "cgo_check", "p": 2, "xi": [1, 0, 0], "t": 2}"#);
    let (code, errors) = validate(&config, &[]);
    assert_eq!(code, 2);
    assert_eq!(errors.len(), 1);
    assert!(errors[0].starts_with("p: ") && errors[0].contains("p ∈ (1,∞)\\{2}"), "{errors:?}");
    assert_eq!(validate(&config, &["--sanity-p2"]), (0, vec![]));
}

#[test]
fn parabolic_kinds_cite_the_exponent_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["parabolic_run", "comparison_check"] {
        let text = format!(r#"{{"kind": "{kind}", "mesh": {{"subdivisions": 4}}, "p": 3, "m": 2, "boundary": "1"}}"#);
        let config = write_config(dir.path(), "c.json", &text);
        let (code, errors) = validate(&config, &[]);
        assert_eq!(code, 2);
        assert_eq!(errors.len(), 1);
        assert!(errors[0].starts_with("m: ") && errors[0].contains("m > p − 1"), "{errors:?}");
    }
}

#[test]
fn valid_files_give_an_empty_error_list() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", CGO);
    assert_eq!(validate(&config, &[]), (0, vec![]));
}

#[test]
fn validation_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"kind": "linearize_check", "mesh": {"subdivisions": 4, "extra": 1}, "p": 0.5, "m": 0,
            "boundary": "x1 + y", "test": "x2", "taus": [1e-2, 2e-2], "colour": "red"}"#,
    );
    let (code, errors) = validate(&config, &[]);
    assert_eq!(code, 2);
    let paths: Vec<&str> = errors.iter().map(|e| e.split(':').next().unwrap()).collect();
    for want in ["mesh.extra", "p", "m", "boundary", "direction", "taus", "colour"] {
        assert!(paths.contains(&want), "{want} missing from {errors:?}");
    }
}

#[test]
fn mesh_files_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("square.mesh"), dnlab_core::make_unit_square_mesh(4).unwrap().to_text()).unwrap();
    let config = write_config(
        &sub,
        "c.json",
        r#"{"kind": "elliptic_solve", "mesh": {"file": "square.mesh"}, "p": 1.5, "m": 1, "boundary": "x1 + x2"}"#,
    );
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 25);
    let missing = write_config(&sub, "d.json", r#"{"kind": "elliptic_solve", "mesh": {"file": "nope.mesh"}, "p": 3, "m": 1, "boundary": "1"}"#);
    let (code, errors) = validate(&missing, &[]);
    assert_eq!(code, 2);
    assert!(errors[0].starts_with("mesh.file: cannot read"), "{errors:?}");
}

#[test]
fn solver_failure_reports_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 6}, "p": 3, "m": 1, "potential": "1",
            "boundary": "1 + x1", "solver": {"max_newton": 1}}"#,
    );
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("failed  solve") && err.contains("did not converge"), "{err}");
}

#[test]
fn inadmissible_problems_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    // negative boundary data with absorption passes the schema but not the problem checks
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 4}, "p": 3, "m": 1, "potential": "1", "boundary": "x1 - 0.5"}"#,
    );
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("boundary data must be nonnegative"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = dnlab(&["run", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(4));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("cgo.json", CGO.to_string()),
        (
            "ell.json",
            r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 6}, "p": 3, "m": 0.5, "potential": "1 + x1",
                "boundary": "0.5 + x1*x2"}"#
                .to_string(),
        ),
    ];
    for (name, text) in configs {
        let config = write_config(dir.path(), name, &text);
        let out = dir.path().join(format!("out-{name}"));
        assert_eq!(run(&config, &out, &["--seed", "11"]).status.code(), Some(0));
        let first = snapshot(&out);
        assert_eq!(run(&config, &out, &["--seed", "11"]).status.code(), Some(0));
        assert_eq!(first, snapshot(&out), "{name}");
        let manifest = json_file(&out.join("manifest.json"));
        assert_eq!(manifest["seed"], 11);
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    }
    // a different seed changes the random frames and nothing else
    let config = dir.path().join("cgo.json");
    let a = dir.path().join("seed-a");
    let b = dir.path().join("seed-b");
    run(&config, &a, &["--seed", "1"]);
    run(&config, &b, &["--seed", "2"]);
    assert_eq!(fs::read(a.join("frame.json")).unwrap(), fs::read(b.join("frame.json")).unwrap());
    assert_ne!(fs::read(a.join("random_frames.csv")).unwrap(), fs::read(b.join("random_frames.csv")).unwrap());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            assert_eq!(validate(&path, &[]), (0, vec![]), "{}", path.display());
            count += 1;
        }
    }
    assert_eq!(count, 9);
}
