use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use procshadow::cli::run;

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn call(args: &[&str]) -> i32 {
    run(std::iter::once("procshadow").chain(args.iter().copied()))
}

fn csv_body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_learn_predict_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(
        dir.path(),
        "rotation.json",
        &json!({
            "seed": 11,
            "channel": {"type": "rotation", "n": 2, "qubit": 0, "axis": "X", "theta": std::f64::consts::PI},
            "dataset": {"count": 4000, "mode": "snapshot"},
            "observables": [{"id": "Z_1", "n": 2, "terms": [{"p": "ZI", "c": 1.0}]}],
            "learner": {"mode": "processE-setting2", "epsilon": 0.5}
        }),
    );
    let (data, again) = (dir.path().join("data.jsonl"), dir.path().join("again.jsonl"));
    assert_eq!(call(&["gen-data", "--config", s(&config), "--out", s(&data)]), 0);
    assert_eq!(call(&["gen-data", "--config", s(&config), "--out", s(&again), "--threads", "1"]), 0);
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());

    let model = dir.path().join("model.json");
    let code = call(&["learn", "--config", s(&config), "--data", s(&data), "--observable", "Z_1", "--out", s(&model)]);
    assert_eq!(code, 0);
    let saved: Value = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    assert_eq!(saved["provenance"]["seed"], 11);
    assert_eq!(saved["provenance"]["config_sha256"].as_str().unwrap().len(), 64);

    let states = dir.path().join("states.jsonl");
    std::fs::write(&states, "{\"labels\": [\"Z+\", \"Z+\"]}\n{\"bloch\": [[0, 0, -1], [1, 0, 0]]}\n").unwrap();
    let preds = dir.path().join("preds.csv");
    let code = call(&["predict", "--seed", "1", "--model", s(&model), "--states", s(&states), "--out", s(&preds)]);
    assert_eq!(code, 0);
    let rows = csv_body(&preds);
    assert_eq!(rows[0], "index,prediction");
    let values: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 2);
    assert!((values[0] + 1.0).abs() < 0.2, "{values:?}");
    assert!((values[1] - 1.0).abs() < 0.2, "{values:?}");
}

#[test]
fn optimize_and_verify_norms() {
    let dir = tempfile::tempdir().unwrap();
    let h = write_json(dir.path(), "h.json", &json!([{"p": "XXI", "c": 1.0}, {"p": "IZZ", "c": -0.5}, {"p": "ZII", "c": 0.3}]));
    let report = dir.path().join("report.json");
    assert_eq!(call(&["optimize", "--seed", "2", "--hamiltonian", s(&h), "--runs", "300", "--out", s(&report)]), 0);
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["runs"], 300);
    assert_eq!(r["bound_met"], true);
    assert!(r["mean_abs_margin"].as_f64().unwrap() >= r["theorem_bound"].as_f64().unwrap());

    let norms = dir.path().join("norms.csv");
    assert_eq!(call(&["verify-norms", "--seed", "3", "--k", "2", "--n", "4", "--trials", "40", "--out", s(&norms)]), 0);
    let rows = csv_body(&norms);
    assert_eq!(rows[0], "instance_id,inequality,k,d,lhs,rhs,holds");
    assert_eq!(rows.len(), 81);
    assert!(rows[1..].iter().all(|r| r.ends_with(",true")));
}

#[test]
fn small_figure_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(
        dir.path(),
        "fig.json",
        &json!({"seed": 5, "figure": {"n": 6, "train": 400, "times": [0.0, 2.0], "grid": {"k": [1, 2], "a": [0.01, 0.001]}}}),
    );
    let out = dir.path().join("fig3.csv");
    assert_eq!(call(&["reproduce-fig", "3", "--config", s(&config), "--out", s(&out)]), 0);
    let rows = csv_body(&out);
    assert_eq!(rows[0], "site,t,predicted,exact");
    assert_eq!(rows.len(), 1 + 12);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# procshadow "));
}

#[test]
fn bad_inputs_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(&["gen-data"]), 2);
    assert_eq!(call(&["gen-data", "--seed", "1"]), 2);
    let typo = write_json(dir.path(), "typo.json", &json!({"seed": 1, "chanel": {"type": "identity", "n": 1}}));
    assert_eq!(call(&["gen-data", "--config", s(&typo)]), 2);
    assert_eq!(call(&["verify-norms", "--seed", "1", "--k", "3", "--n", "2"]), 2);
    assert_eq!(call(&["no-such-command"]), 2);
}
