use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lgcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgcert")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bound_endpoints_and_grid() {
    let o = lgcert(&["bound", "--alpha", "0.5", "--mode", "joint"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "alpha,bits,mode\n0.5,1.41504,joint\n");

    let o = lgcert(&["bound", "--grid", "0:0.5:0.05", "--format", "json"]);
    let rows = json(&o)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 11);
    let last = rows[10]["bits"].as_f64().unwrap();
    assert!((last - 0.415).abs() < 0.005);
}

#[test]
fn optimize_joint_matches_closed_form() {
    let o = lgcert(&["optimize", "--alpha", "0.3", "--mode", "joint", "--restarts", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let best = v["result"]["best_value"].as_f64().unwrap();
    assert!((best - 0.483114).abs() < 1e-4, "{best}");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn simulate_is_reproducible_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    for out in [&first, &second] {
        let o = lgcert(&["simulate", "--canonical-alpha", "0.31", "--n", "20000", "--seed", "3", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&first).unwrap();
    assert_eq!(text.lines().count(), 20_000);
    assert_eq!(text, fs::read_to_string(&second).unwrap());
    let manifest = |p: &Path| -> Value {
        let m = p.with_file_name(format!("{}.manifest.json", p.file_name().unwrap().to_str().unwrap()));
        serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap()
    };
    assert_eq!(manifest(&first)["trials_sha256"], manifest(&second)["trials_sha256"]);

    let o = lgcert(&["certify", "--trials", path(&first)]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 2);
    let report = json(&o);
    let i_hat = report["I_hat"].as_f64().unwrap();
    assert!((i_hat - 1.31).abs() < 0.05, "{i_hat}");
    assert!(report["nsit_hat"].is_array());
}

#[test]
fn bits_directory_has_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("t.jsonl");
    let bits = dir.path().join("bits");
    let o = lgcert(&[
        "simulate", "--canonical-alpha", "0.5", "--n", "5000", "--out", path(&trials), "--bits-dir", path(&bits),
        "--no-nsit-audit",
    ]);
    assert!(o.status.success());
    let m: Value = serde_json::from_str(&fs::read_to_string(bits.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["total_length"], 5000);
    for g in m["groups"].as_array().unwrap() {
        let file = bits.join(g["file"].as_str().unwrap());
        assert_eq!(fs::read_to_string(file).unwrap().trim().len() as u64, g["length"].as_u64().unwrap());
    }
}

#[test]
fn certify_headline_numbers() {
    let o = lgcert(&["certify", "--I", "1.31", "--n", "1e5"]);
    assert!(o.status.success());
    let bits = json(&o)["total_bits"].as_u64().unwrap();
    assert!(bits.abs_diff(3673) <= 2, "{bits}");

    let o = lgcert(&["certify", "--I", "1.31", "--n", "100000", "--dist", "biased:1/6,5/12,5/12"]);
    assert_eq!(json(&o)["total_bits"], 2777);
}

#[test]
fn certify_without_violation_exits_two() {
    let o = lgcert(&["certify", "--I", "1.0", "--n", "100000"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["total_bits"], 0);
}

#[test]
fn malformed_trial_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.jsonl");
    fs::write(&file, "{\"i\":0,\"x\":1,\"y\":2,\"a\":1,\"b\":-1}\n{\"i\":1,\"x\":1,\"y\":2,\"a\":1}\n").unwrap();
    let o = lgcert(&["certify", "--trials", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = lgcert(&["certify", "--trials", path(&dir.path().join("missing.jsonl"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn memory_curve_and_nsit_radius() {
    let o = lgcert(&["memory-curve", "--I", "1.31", "--n-grid", "1000,100000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,total_bits,mode");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("100000,367"));

    let o = lgcert(&["nsit-audit", "--n-grid", "100000"]);
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    let eps: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((eps - 0.0144).abs() < 5e-5);
}

#[test]
fn usage_errors() {
    assert_eq!(lgcert(&["bound", "--bogus"]).status.code(), Some(1));
    assert_eq!(lgcert(&["bound", "--alpha", "0.7"]).status.code(), Some(1));
    assert_eq!(lgcert(&["certify", "--I", "1.3"]).status.code(), Some(1));
    let help = lgcert(&["--help"]);
    assert!(help.status.success());
    for sub in ["bound", "optimize", "simulate", "certify", "memory-curve", "nsit-audit", "repro-paper"] {
        assert!(stdout(&help).contains(sub), "{sub}");
    }
}

#[test]
fn repro_quick_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = lgcert(&["repro-paper", "--quick", "--restarts", "8", "--out-dir", path(dir.path())]);
    assert!(o.status.success(), "{}", stdout(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let checks = summary["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["pass"] == true));
    for f in ["bound_joint.csv", "bound_conditional.csv", "memory_uniform.csv", "nsit_curve.csv", "summary.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn optimize_relaxed_nsit_still_certifies() {
    let o = lgcert(&["optimize", "--alpha", "0.5", "--v", "0.05", "--mode", "conditional", "--restarts", "4"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["bits"].as_f64().unwrap() > 0.0);
    assert!(v["result"]["converged"].as_bool().unwrap());
}

#[test]
fn simulate_to_stdout() {
    let args = ["simulate", "--canonical-alpha", "0.31", "--n", "1000", "--seed", "7"];
    let o = lgcert(&args);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1000);
    assert_eq!(o.stdout, lgcert(&args).stdout);
}
