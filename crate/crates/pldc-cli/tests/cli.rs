//! End-to-end command tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pldc")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn pldc")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn s(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

#[test]
fn fit_predict_round_trip_reproduces_fitted_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("two_points.csv");
    write(&data, "x1,y\n0,0\n1,1\n");
    let model = dir.path().join("model.json");

    let out = run(&[
        "fit", "--data", &s(&data), "--loss", "l2", "--lambda", "1e-8", "--out", &s(&model),
        "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["training_metric"].as_f64().unwrap() <= 1e-4);

    let pred = dir.path().join("yhat.csv");
    let out = run(&["predict", "--model", &s(&model), "--data", &s(&data), "--out", &s(&pred)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&pred).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.parse::<f64>().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!(values[0].abs() <= 1e-4 && (values[1] - 1.0).abs() <= 1e-4);
}

#[test]
fn model_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..8 {
        let a = (i as f64) * 0.7 - 2.0;
        let b = ((i * i) as f64).sin();
        csv.push_str(&format!("{a},{b},{}\n", a * b + 0.1 * (i as f64)));
    }
    write(&data, &csv);
    let model = dir.path().join("model.json");
    assert!(run(&[
        "fit", "--data", &s(&data), "--loss", "l1", "--lambda", "0.05", "--out", &s(&model)
    ])
    .status
    .success());

    // predict, re-save via load (read+write the JSON), predict again
    let p1 = dir.path().join("p1.csv");
    let p2 = dir.path().join("p2.csv");
    assert!(run(&["predict", "--model", &s(&model), "--data", &s(&data), "--out", &s(&p1)])
        .status
        .success());
    let text = std::fs::read_to_string(&model).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let model2 = dir.path().join("model2.json");
    write(&model2, &serde_json::to_string_pretty(&reparsed).unwrap());
    assert!(run(&["predict", "--model", &s(&model2), "--data", &s(&data), "--out", &s(&p2)])
        .status
        .success());
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p2).unwrap(),
        "round-tripped model must predict byte-identically"
    );
}

#[test]
fn missing_target_column_exits_2_with_name() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    write(&data, "x1,target\n0,1\n");
    let out = run(&["fit", "--data", &s(&data), "--loss", "l2", "--lambda", "1", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"y\""), "stderr: {err}");
}

#[test]
fn non_numeric_cell_exits_2_with_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    write(&data, "x1,y\n0,1\noops,2\n");
    let out = run(&["fit", "--data", &s(&data), "--loss", "l2", "--lambda", "1", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("\"x1\""), "stderr: {err}");
}

#[test]
fn corrupted_model_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    write(&data, "x1,y\n0,0\n");
    let model = dir.path().join("model.json");
    write(&model, "{ not json ");
    let out = run(&["predict", "--model", &s(&model), "--data", &s(&data), "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_input_predicts_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, "x1,y\n0,0\n1,1\n");
    let model = dir.path().join("model.json");
    assert!(run(&[
        "fit", "--data", &s(&train), "--loss", "l2", "--lambda", "0.1", "--out", &s(&model)
    ])
    .status
    .success());

    let empty = dir.path().join("empty.csv");
    write(&empty, "");
    let out_path = dir.path().join("out.csv");
    let out = run(&["predict", "--model", &s(&model), "--data", &s(&empty), "--out", &s(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1, "header only, got: {text:?}");
}

#[test]
fn predict_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, "x1,x2,y\n0,0,0\n1,1,1\n2,0,1\n");
    let model = dir.path().join("model.json");
    assert!(run(&[
        "fit", "--data", &s(&train), "--loss", "l2", "--lambda", "0.1", "--out", &s(&model)
    ])
    .status
    .success());
    let narrow = dir.path().join("narrow.csv");
    write(&narrow, "x1\n0\n");
    let out = run(&["predict", "--model", &s(&model), "--data", &s(&narrow), "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discrepancy_hand_values_and_odd_row_warning() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pair.csv");
    write(&data, "x1,y\n0,0\n1,0\n");
    let out = run(&["discrepancy", "--data", &s(&data), "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() <= 1e-6);
    // theoretical lambda with default M = 1/12 is 2 * Dhat
    assert!((v["theoretical_lambda"].as_f64().unwrap() - 4.0).abs() <= 1e-5);

    let out = run(&["discrepancy", "--data", &s(&data), "--L", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 4.0).abs() <= 1e-5);

    let odd = dir.path().join("odd.csv");
    write(&odd, "x1,y\n0,0\n1,0\n5,0\n");
    let out = run(&["discrepancy", "--data", &s(&odd)]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dropped data row 3"), "stderr: {err}");
}

#[test]
fn synth_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        assert!(run(&[
            "synth", "--n", "10", "--d", "3", "--noise", "0.25", "--seed", "11", "--out", &s(path)
        ])
        .status
        .success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn eval_of_mean_predictor_is_100() {
    let dir = tempfile::tempdir().unwrap();
    let test = dir.path().join("test.csv");
    // y values with mean 2.0
    write(&test, "x1,y\n0,1\n1,2\n2,3\n");
    // hand-written constant model predicting the test mean
    let model = dir.path().join("model.json");
    write(
        &model,
        r#"{"version":1,"task":"regression","standardizer":null,"classes":null,
           "models":[{"phi1":[{"slope":[0.0],"offset":2.0}],"phi2":[{"slope":[0.0],"offset":0.0}]}],
           "meta":null}"#,
    );
    let out = run(&["eval", "--model", &s(&model), "--test", &s(&test), "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["nmse"].as_f64().unwrap() - 100.0).abs() <= 1e-9);
}

#[test]
fn convert_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    // small net: 2 inputs, one hidden layer of 2
    let net = dir.path().join("net.json");
    write(
        &net,
        r#"{"version":1,"weights":[[[1.0,-0.5],[0.25,1.5]]],"output":[1.0,-2.0]}"#,
    );
    let model = dir.path().join("model.json");
    let out = run(&["convert", "--relu", &s(&net), "--to", "pldc", "--out", &s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let net2 = dir.path().join("net2.json");
    let out = run(&["convert", "--model", &s(&model), "--to", "relu", "--out", &s(&net2)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // evaluate the round-tripped network against the original on a grid:
    // the second net takes augmented inputs (x, 1)
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&net).unwrap()).unwrap();
    let w2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&net2).unwrap()).unwrap();
    let forward = |spec: &serde_json::Value, x: &[f64]| -> f64 {
        let mut act: Vec<f64> = x.to_vec();
        for layer in spec["weights"].as_array().unwrap() {
            let mut next = Vec::new();
            for row in layer.as_array().unwrap() {
                let row: Vec<f64> =
                    row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                let z: f64 = row.iter().zip(&act).map(|(a, b)| a * b).sum();
                next.push(z.max(0.0));
            }
            act = next;
        }
        spec["output"]
            .as_array()
            .unwrap()
            .iter()
            .zip(&act)
            .map(|(a, b)| a.as_f64().unwrap() * b)
            .sum()
    };
    for i in -3..=3 {
        for j in -3..=3 {
            let x = [i as f64 * 0.7, j as f64 * 0.6];
            let want = forward(&w, &x);
            let got = forward(&w2, &[x[0], x[1], 1.0]);
            assert!((want - got).abs() <= 1e-9, "at {x:?}: {want} vs {got}");
        }
    }
}

#[test]
fn fit_cv_reports_full_grid_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    assert!(run(&[
        "synth", "--n", "14", "--d", "2", "--noise", "0.25", "--seed", "2", "--out", &s(&data)
    ])
    .status
    .success());
    let model = dir.path().join("model.json");
    let out = run(&[
        "fit", "--data", &s(&data), "--loss", "l1", "--cv", "3", "--seed", "1", "--max-iters",
        "600", "--out", &s(&model), "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let table = report["cv_table"].as_array().expect("cv table present");
    assert_eq!(table.len(), 10, "one row per grid point");
    let grid: Vec<f64> = table.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    let best = report["lambda"].as_f64().unwrap();
    assert!(grid.contains(&best), "selected lambda comes from the grid");
    for w in grid.windows(2) {
        assert!((w[0] / w[1] - 2.0).abs() <= 1e-9, "powers-of-two grid");
    }
}

#[test]
fn multiclass_fit_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("classes.csv");
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..10 {
        let j = (i % 2) as f64;
        csv.push_str(&format!("{},{},a\n", -3.0 - j, j));
        csv.push_str(&format!("{},{},b\n", 3.0 + j, j));
        csv.push_str(&format!("{},{},c\n", j, 5.0 + j));
    }
    write(&data, &csv);
    let model = dir.path().join("mc.json");
    let out = run(&[
        "fit", "--data", &s(&data), "--loss", "hinge", "--lambda", "0.05", "--max-iters", "3000",
        "--out", &s(&model), "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["task"], "multiclass");
    assert!(report["training_misclassification"].as_f64().unwrap() <= 0.1);

    let pred = dir.path().join("labels.csv");
    let out = run(&["predict", "--model", &s(&model), "--data", &s(&data), "--out", &s(&pred)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&pred).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("label,score_a,score_b,score_c"), "{header}");
}
