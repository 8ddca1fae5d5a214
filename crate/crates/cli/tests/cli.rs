use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn margmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margmap")).args(args).output().expect("spawn margmap")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate_grid(dir: &Path, name: &str, seed: &str) -> (String, String) {
    let prefix = dir.join(name);
    let out = margmap(&["generate", "grid", "--rows", "4", "--cols", "4", "--seed", seed, "--output", path(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (format!("{}.uai", path(&prefix)), format!("{}.query", path(&prefix)))
}

fn json(text: &[u8]) -> Value {
    serde_json::from_slice(text).expect("valid JSON")
}

#[test]
fn solve_grid_converges_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query) = generate_grid(dir.path(), "g", "5");
    let report = dir.path().join("report.json");
    let out = margmap(&["solve", "--model", &model, "--query", &query, "--verify", "--output", path(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&fs::read(&report).unwrap());
    assert_eq!(r["status"], "converged");
    assert!((r["gap"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r["verification"]["agrees"], true);
    assert_eq!(r["problem"]["n_decision"], 12);
    assert_eq!(r["assignment"].as_object().unwrap().len(), 12);
    let steps = r["steps"].as_array().unwrap();
    assert_eq!(steps.last().unwrap()["z_lower"], r["z_lower"]);
    for key in ["mantissa", "exponent", "value"] {
        assert!(r["z_upper"].get(key).is_some());
    }
}

#[test]
fn zero_time_limit_reports_step_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query) = generate_grid(dir.path(), "g", "6");
    let out = margmap(&["solve", "--model", &model, "--query", &query, "--time-limit", "0", "--growth", "all"]);
    let r = json(&out.stdout);
    if r["status"] == "converged" {
        // step 0 already closed the gap
        assert_eq!(out.status.code(), Some(0));
    } else {
        assert_eq!(out.status.code(), Some(2));
        assert_eq!(r["status"], "time-limit");
    }
    assert_eq!(r["steps"].as_array().unwrap().len(), 1);
    assert!(r["z_lower"]["value"].as_f64().unwrap() <= r["z_upper"]["value"].as_f64().unwrap());
}

#[test]
fn malformed_query_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = generate_grid(dir.path(), "g", "1");
    let bad = dir.path().join("bad.query");
    fs::write(&bad, "2 0 x\n").unwrap();
    let out = margmap(&["solve", "--model", &model, "--query", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.query") && err.contains("line 1"), "{err}");
}

#[test]
fn generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_grid(dir.path(), "a", "42");
    let b = generate_grid(dir.path(), "b", "42");
    assert_eq!(fs::read(&a.0).unwrap(), fs::read(&b.0).unwrap());
    assert_eq!(fs::read(&a.1).unwrap(), fs::read(&b.1).unwrap());
    let c = generate_grid(dir.path(), "c", "43");
    assert_ne!(fs::read(&a.0).unwrap(), fs::read(&c.0).unwrap());
}

#[test]
fn knapsack_shape_and_roomy_single_bag() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ks");
    let out = margmap(&["generate", "knapsack", "--bags", "3", "--items", "20", "--output", path(&prefix)]);
    let info = json(&out.stdout);
    assert_eq!(info["n_vars"], 42);
    assert_eq!(info["n_decision"], 20);

    let out = margmap(&[
        "generate", "knapsack", "--bags", "1", "--items", "5", "--capacity", "100", "--seed", "3", "--output", path(&prefix),
    ]);
    assert!(out.status.success());
    let model = format!("{}.uai", path(&prefix));
    let query = format!("{}.query", path(&prefix));
    let oracle = json(&margmap(&["oracle", "--model", &model, "--query", &query]).stdout);
    let argmax = oracle["argmax"].as_array().unwrap();
    assert_eq!(argmax.len(), 1);
    assert!(argmax[0].as_object().unwrap().values().all(|s| s == 1));

    let out = margmap(&["solve", "--model", &model, "--query", &query, "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["assignment"], argmax[0]);
}

#[test]
fn bench_writes_reports_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query) = generate_grid(dir.path(), "g", "8");
    let spec = serde_json::json!({
        "config": { "k_init": 1 },
        "instances": [
            { "name": "grid", "source": { "grid": { "rows": 3, "cols": 3, "seed": 2 } } },
            { "name": "files", "source": { "files": { "model": model, "query": query } } },
            { "name": "tight", "source": { "knapsack": { "items": 6 } }, "config": { "memory_cap": 16 } },
        ]
    });
    let spec_path = dir.path().join("bench.json");
    fs::write(&spec_path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = margmap(&["bench", path(&spec_path), "--output", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut steps = 0;
    for name in ["grid", "files"] {
        let r = json(&fs::read(out_dir.join(format!("{name}.json"))).unwrap());
        assert_eq!(r["instance"], name);
        assert_eq!(r["status"], "converged");
        steps += r["steps"].as_array().unwrap().len();
    }
    let tight = json(&fs::read(out_dir.join("tight.json")).unwrap());
    assert_eq!(tight["status"], "failed");
    assert!(tight["error"].as_str().unwrap().contains("budget"));

    let csv = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("instance,t,wall_clock,z_lower,z_upper"));
    assert_eq!(lines.count(), steps);
    assert!(!out_dir.join("grid.json.tmp").exists());
}
