//! End-to-end checks of the `csep` binary: exit codes, file formats, and
//! trace outputs.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn csep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let mut dir = std::env::temp_dir();
    dir.push(format!("csep-cli-test-{}-{name}", std::process::id()));
    dir
}

#[test]
fn gen_writes_sumkernel_file() {
    let path = tmp("ex3.json");
    let out = csep(&["gen", "--example", "3", "--n", "4", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["format"], "csmat-v1");
    assert_eq!(value["repr"], "sumkernel");
    assert_eq!(value["phi"].as_array().unwrap().len(), 13);
    fs::remove_file(&path).ok();
}

#[test]
fn gen_is_byte_deterministic() {
    let a = csep(&["gen", "--example", "1", "--n", "8", "--seed", "7"]);
    let b = csep(&["gen", "--example", "1", "--n", "8", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn gen_rejects_unknown_example() {
    let out = csep(&["gen", "--example", "9", "--n", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_rank_one_atom() {
    let path = tmp("atom.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[1.0],"vectors":[[1.0,0.0]]}"#,
    )
    .unwrap();
    let out = csep(&["check", path.to_str().unwrap()]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["theorem1_verdict"], "SSEP_RANK1");
    assert_eq!(value["rank"], 1);
    fs::remove_file(&path).ok();
}

#[test]
fn check_flags_example3_as_not_a_state() {
    let form_path = tmp("ex3n4.json");
    assert!(csep(&["gen", "--example", "3", "--n", "4", "-o", form_path.to_str().unwrap()])
        .status
        .success());
    let out = csep(&["check", form_path.to_str().unwrap()]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["theorem1_verdict"], "NOT_A_STATE");
    assert!(value["min_eigenvalue"].as_f64().unwrap() < 0.0);
    fs::remove_file(&form_path).ok();
}

#[test]
fn check_rejects_asymmetric_dense_with_exit_4() {
    let path = tmp("bad.json");
    let mut entries = vec![0.0; 16];
    entries[1] = 0.5; // eta_0001
    entries[2] = 0.0; // eta_0010 differs -> not completely symmetric
    let payload = serde_json::json!({
        "format": "csmat-v1", "n": 2, "repr": "dense", "entries": entries,
    });
    fs::write(&path, payload.to_string()).unwrap();
    let out = csep(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    fs::remove_file(&path).ok();
}

#[test]
fn check_missing_file_is_exit_3() {
    let out = csep(&["check", "/nonexistent/definitely-missing.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_inner_on_atom_reports_quarter() {
    let path = tmp("atom2.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[1.0],"vectors":[[1.0,0.0]]}"#,
    )
    .unwrap();
    let trace_path = tmp("inner.csv");
    let out = csep(&[
        "solve-inner",
        path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((value["f_star"].as_f64().unwrap() - 0.25).abs() < 1e-10);
    assert!((value["lambda_star"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(value["config"]["tol_inner"].as_f64().unwrap(), 1e-12);
    assert_eq!(value["config"]["max_inner"].as_u64().unwrap(), 500);
    let trace = fs::read_to_string(&trace_path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,f,kkt_residual,step_source"));
    let mut prev_f = f64::NEG_INFINITY;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        let f: f64 = fields[1].parse().unwrap();
        assert!(f >= prev_f - 1e-12, "trace not monotone");
        prev_f = f;
    }
    fs::remove_file(&path).ok();
    fs::remove_file(&trace_path).ok();
}

#[test]
fn solve_inner_iteration_cap_is_exit_1() {
    let path = tmp("pair.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[0.6,0.4],"vectors":[[1.0,0.0],[0.0,1.0]]}"#,
    )
    .unwrap();
    let out = csep(&["solve-inner", path.to_str().unwrap(), "--max-inner", "0", "--tol-inner", "0"]);
    assert_eq!(out.status.code(), Some(1));
    fs::remove_file(&path).ok();
}

#[test]
fn project_atom_is_separable_with_traces() {
    let path = tmp("atom3.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[1.0],"vectors":[[0.6,0.8]]}"#,
    )
    .unwrap();
    let trace_path = tmp("outer.csv");
    let atoms_path = tmp("atoms-out.json");
    let out = csep(&[
        "project",
        path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
        "--atoms-out",
        atoms_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["verdict"], "S_SEPARABLE_NUMERICAL");
    assert!(value["distance"].as_f64().unwrap() <= 1e-8);
    assert_eq!(value["config"]["outer_tol"].as_f64().unwrap(), 1e-12);
    assert_eq!(value["config"]["max_outer"].as_u64().unwrap(), 1000);
    assert_eq!(value["config"]["inner"]["max_iterations"].as_u64().unwrap(), 500);
    assert_eq!(value["config"]["starts"].as_u64().unwrap(), 5);

    let trace = fs::read_to_string(&trace_path).unwrap();
    assert!(trace.starts_with("iter,distance,gap,alpha,atom_count,inner_iterations"));

    // the atoms file parses back as a csmat-v1 atoms payload
    let atoms_text = fs::read_to_string(&atoms_path).unwrap();
    let atoms: serde_json::Value = serde_json::from_str(&atoms_text).unwrap();
    assert_eq!(atoms["repr"], "atoms");
    fs::remove_file(&path).ok();
    fs::remove_file(&trace_path).ok();
    fs::remove_file(&atoms_path).ok();
}

#[test]
fn project_signed_pair_is_certified_not_separable() {
    let path = tmp("signed.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[1.0,-1.0],"vectors":[[1.0,0.0],[0.0,1.0]]}"#,
    )
    .unwrap();
    let out = csep(&["project", path.to_str().unwrap()]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["verdict"], "NOT_S_SEPARABLE_CERTIFIED");
    assert!((value["distance"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    fs::remove_file(&path).ok();
}

#[test]
fn project_example2_has_nonincreasing_trace() {
    let form_path = tmp("ex2n4.json");
    assert!(csep(&["gen", "--example", "2", "--n", "4", "--seed", "3", "-o", form_path.to_str().unwrap()])
        .status
        .success());
    let trace_path = tmp("ex2trace.csv");
    let out = csep(&[
        "project",
        form_path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let trace = fs::read_to_string(&trace_path).unwrap();
    let mut prev = f64::INFINITY;
    for line in trace.lines().skip(1) {
        let distance: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(distance <= prev + 1e-12);
        prev = distance;
    }
    fs::remove_file(&form_path).ok();
    fs::remove_file(&trace_path).ok();
}

#[test]
fn project_inconclusive_at_cap_is_exit_1() {
    let form_path = tmp("ex1cap.json");
    assert!(csep(&["gen", "--example", "1", "--n", "4", "--seed", "2", "-o", form_path.to_str().unwrap()])
        .status
        .success());
    let out = csep(&["project", form_path.to_str().unwrap(), "--max-outer", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["verdict"], "INCONCLUSIVE");
    assert_eq!(value["stop_reason"], "max_outer_reached");
    fs::remove_file(&form_path).ok();
}

#[test]
fn non_unit_stored_vector_warns_and_loads() {
    let path = tmp("scaled.json");
    fs::write(
        &path,
        r#"{"format":"csmat-v1","n":2,"repr":"lowrank","weights":[0.0625],"vectors":[[2.0,0.0]]}"#,
    )
    .unwrap();
    let out = csep(&["check", path.to_str().unwrap()]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "expected a rescale warning");
    fs::remove_file(&path).ok();
}
