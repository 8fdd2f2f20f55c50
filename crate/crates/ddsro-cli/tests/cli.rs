use std::path::Path;
use std::process::{Command, Output};

fn ddsro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddsro")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let out = ddsro(&["gen", "--seed", seed, "--samples", "1000", "--out", path_str(path)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = std::fs::read(&a).unwrap();
    assert_eq!(ca, std::fs::read(&b).unwrap(), "same seed must be byte-identical");
    assert_ne!(ca, std::fs::read(&c).unwrap(), "different seeds must differ");
    // header + 1000 data rows
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 1001);
}

#[test]
fn fit_writes_model_with_component_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let model = dir.path().join("model.json");
    assert!(ddsro(&["gen", "--seed", "42", "--samples", "1000", "--out", path_str(&data)])
        .status
        .success());
    let out = ddsro(&["fit", "--data", path_str(&data), "--out", path_str(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let classes = doc["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 4);
    let counts: Vec<usize> =
        classes.iter().map(|c| c["union"]["basics"].as_array().unwrap().len()).collect();
    assert_eq!(counts, vec![2, 2, 2, 1]);
    let probs = &doc["class_probabilities"];
    assert_eq!(probs["0"].as_f64().unwrap(), 0.2);
    assert_eq!(probs["3"].as_f64().unwrap(), 0.1);
}

#[test]
fn fit_rejects_threshold_removing_all_components() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let model = dir.path().join("model.json");
    assert!(ddsro(&["gen", "--seed", "42", "--samples", "200", "--out", path_str(&data)])
        .status
        .success());
    // gamma* = 0.9 removes both halves of every bimodal class
    let out = ddsro(&[
        "fit",
        "--data",
        path_str(&data),
        "--gamma-star",
        "0.9",
        "--out",
        path_str(&model),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("threshold removed all components"), "stderr: {err}");
}

#[test]
fn solve_converges_with_monotone_gap_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let report = dir.path().join("report.json");
    let iters = dir.path().join("iters.csv");
    assert!(ddsro(&["gen", "--seed", "42", "--samples", "1000", "--out", path_str(&data)])
        .status
        .success());
    let out = ddsro(&[
        "solve",
        "--data",
        path_str(&data),
        "--out",
        path_str(&report),
        "--iterations-csv",
        path_str(&iters),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged"), "stdout: {stdout}");

    let mut gaps = Vec::new();
    for line in std::fs::read_to_string(&iters).unwrap().lines().skip(1) {
        gaps.push(line.split(',').nth(3).unwrap().parse::<f64>().unwrap());
    }
    assert!(!gaps.is_empty());
    for pair in gaps.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "gap column must be non-increasing: {gaps:?}");
    }
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["converged"], serde_json::Value::Bool(true));
}

#[test]
fn solve_exit_code_2_when_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert!(ddsro(&["gen", "--seed", "42", "--samples", "1000", "--out", path_str(&data)])
        .status
        .success());
    // one iteration cannot close the gap
    let out = ddsro(&["solve", "--data", path_str(&data), "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NOT converged"));
}

#[test]
fn usage_errors_exit_1() {
    let out = ddsro(&["solve", "--data", "/nonexistent/file.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ddsro(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn benchmark_table_roundtrips_and_orders_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let table = dir.path().join("table.csv");
    assert!(ddsro(&["gen", "--seed", "42", "--samples", "1000", "--out", path_str(&data)])
        .status
        .success());
    let out = ddsro(&[
        "benchmark",
        "--data",
        path_str(&data),
        "--scenarios",
        "100",
        "--out",
        path_str(&table),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&table).unwrap();
    let mut by_method = std::collections::BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let method = parts.next().unwrap().to_string();
        let obj: f64 = parts.next().unwrap().parse().unwrap();
        by_method.insert(method, obj);
    }
    assert_eq!(by_method.len(), 5);
    // min-sense conservatism ordering
    assert!(by_method["deterministic"] <= by_method["scenario-sp"] + 1e-6);
    assert!(by_method["scenario-sp"] <= by_method["ddsro"] + 1e-6);
    assert!(by_method["ddsro"] <= by_method["ddanro"] + 1e-6);
    assert!(by_method["ddanro"] <= by_method["box-aro"] + 1e-6);
    // the printed table shows the same objective values
    let stdout = String::from_utf8_lossy(&out.stdout);
    for (method, obj) in &by_method {
        let shown = format!("{obj:.4}");
        assert!(
            stdout.contains(method) && stdout.contains(&shown),
            "table row for {method} ({shown}) missing in stdout"
        );
    }
}
