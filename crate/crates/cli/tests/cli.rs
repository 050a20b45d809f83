use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hedon_cli::commands::predict::{BlockPrediction, Status};
use hedon_cli::commands::report::Report;
use hedon_cli::commands::sweep::Curve;
use hedon_cli::manifest::{sha256_file, RunManifest};
use hedon_core::dataset::{read_graph, Dataset};
use hedon_core::metrics::EvalReport;
use hedon_core::model::{forward, load_params, save_params, Instance};

fn hedon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedon"))
        .current_dir(dir)
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = hedon(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read<T: serde::de::DeserializeOwned>(path: PathBuf) -> T {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

const SMALL: &str = r#"{"n_blocks": 200, "n_facilities": 400,
  "bbox": {"min_lat": 31.2, "min_lon": 121.5, "max_lat": 31.27, "max_lon": 121.58},
  "residential_extent": 0.7}"#;

/// A generated city plus a short training run, shared by several tests.
fn trained(dir: &Path) {
    fs::write(dir.join("synth.json"), SMALL).unwrap();
    ok(dir, &["generate", "--config", "synth.json", "--seed", "2", "--out", "gen"]);
    ok(dir, &["build-graph", "--pois", "gen/pois.jsonl", "--radius-km", "1", "--out", "graph"]);
    ok(
        dir,
        &["train", "--pois", "gen/pois.jsonl", "--graph", "graph/graph.jsonl", "--max-epochs", "120", "--seed", "4", "--out", "train"],
    );
}

#[test]
fn generate_is_reproducible_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("synth.json"), SMALL).unwrap();
    ok(d, &["generate", "--config", "synth.json", "--seed", "5", "--out", "a"]);
    ok(d, &["generate", "--config", "synth.json", "--seed", "5", "--out", "b"]);
    ok(d, &["generate", "--config", "synth.json", "--seed", "6", "--out", "c"]);
    let pois = fs::read_to_string(d.join("a/pois.jsonl")).unwrap();
    assert_eq!(pois.lines().count(), 600);
    for f in ["pois.jsonl", "planted.json", "true_prices.json"] {
        assert_eq!(sha256_file(&d.join("a").join(f)).unwrap(), sha256_file(&d.join("b").join(f)).unwrap());
    }
    assert_ne!(sha256_file(&d.join("a/pois.jsonl")).unwrap(), sha256_file(&d.join("c/pois.jsonl")).unwrap());

    let m: RunManifest = read(d.join("a/manifest.json"));
    assert_eq!(m.command, "generate");
    assert_eq!(m.seed, Some(5));
    assert!(m.error.is_none());
    assert_eq!(m.outputs.len(), 5);
    assert!(m.outputs.iter().all(|a| a.sha256.len() == 64));

    fs::write(d.join("zero.json"), r#"{"n_blocks": 0}"#).unwrap();
    let out = hedon(d, &["generate", "--config", "zero.json", "--out", "z"]);
    assert_eq!(out.status.code(), Some(2));
    let m: RunManifest = read(d.join("z/manifest.json"));
    assert!(m.error.unwrap().contains("n_blocks"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = hedon(d, &["train", "--pois", "missing.jsonl", "--out", "t"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    let out = hedon(d, &["train", "--pois", "missing.jsonl", "--resume", "t", "--out", "t"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be resumed"));

    assert_eq!(hedon(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(hedon(d, &["train"]).status.code(), Some(2));
    assert_eq!(hedon(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn train_evaluate_predict_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);

    // Training outputs and the streamed epoch log.
    let log = fs::read_to_string(d.join("train/epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 120);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "loss", "grad_norms", "seconds"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let model = load_params(d.join("train/model.json")).unwrap();
    assert_eq!(model.meta.seed, Some(4));
    assert_eq!(model.meta.radius_km, Some(1.0));

    // Evaluation: split mismatch, then a full table twice.
    let out = hedon(d, &["evaluate", "--pois", "gen/pois.jsonl", "--model", "train/model.json", "--seed", "5", "--out", "bad"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split mismatch"));
    for out_dir in ["e1", "e2"] {
        ok(d, &["evaluate", "--pois", "gen/pois.jsonl", "--graph", "graph/graph.jsonl", "--model", "train/model.json", "--baseline", "all", "--out", out_dir]);
    }
    assert_eq!(fs::read(d.join("e1/eval.json")).unwrap(), fs::read(d.join("e2/eval.json")).unwrap());
    let reports: Vec<EvalReport> = read(d.join("e1/eval.json"));
    let methods: Vec<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, ["model", "citywide_avg", "macro_avg", "micro_avg", "linear_regression"]);
    assert!(reports[0].mae < reports[2].mae, "model should beat macro_avg: {reports:?}");
    assert!(fs::read_to_string(d.join("e1/eval.txt")).unwrap().contains("linear_regression"));

    // A graph built at another radius is refused.
    let out = hedon(d, &["evaluate", "--pois", "gen/pois.jsonl", "--graph", "graph/graph.jsonl", "--radius-km", "2", "--baseline", "macro_avg", "--out", "r2"]);
    assert_eq!(out.status.code(), Some(2));

    // Prediction matches the forward model on the same inputs.
    fs::write(
        d.join("adhoc.jsonl"),
        r#"{"id":"nowhere","kind":"residential_block","lat":0.0,"lon":0.0,"price":null,"attributes":{"type":"house","district":"d1","developer":"dev_a","age":"new","other":"x"}}"#,
    )
    .unwrap();
    ok(d, &["predict", "--model", "train/model.json", "--pois", "gen/pois.jsonl", "--block", "b000,b001", "--adhoc", "adhoc.jsonl", "--out", "pred"]);
    let preds: Vec<BlockPrediction> = read(d.join("pred/predictions.json"));
    assert_eq!(preds.len(), 3);
    assert_eq!(preds[2].status, Status::Uncoverable);
    assert!(preds[2].prediction.is_none());
    let dataset = Dataset::load(d.join("gen/pois.jsonl")).unwrap();
    let graph = read_graph(d.join("graph/graph.jsonl")).unwrap();
    let known: HashMap<String, f64> = dataset.known_prices();
    for p in &preds[..2] {
        let block = dataset.get(&p.id).unwrap();
        let inst = Instance::compile(&dataset.encode(block).unwrap(), graph.get(&p.id).unwrap(), &model, &known, None).unwrap();
        let tr = forward(&inst, &model);
        assert_eq!(p.status, Status::Ok);
        assert_eq!(p.prediction, Some(tr.prediction));
        assert_eq!(p.scale, Some(tr.s));
        assert_eq!(p.top.len(), 5);
        assert!(p.top.windows(2).all(|w| w[0].term >= w[1].term));
    }
    assert!(fs::read_to_string(d.join("pred/predictions.txt")).unwrap().contains("nowhere  uncoverable"));

    // Report rankings and the planted comparison.
    ok(d, &["report", "--model", "train/model.json", "--pois", "gen/pois.jsonl", "--planted", "gen/planted.json", "--out", "rep"]);
    let report: Report = read(d.join("rep/report.json"));
    for list in report.premiums.rankings.values() {
        assert!(list.windows(2).all(|w| w[0].price > w[1].price || (w[0].price == w[1].price && w[0].id < w[1].id)));
    }
    let share: f64 = report.attribute_preferences.iter().map(|a| a.share).sum();
    assert!((share - 1.0).abs() < 1e-12);
    assert!(report.planted.is_some());
    assert!(fs::read_to_string(d.join("rep/report.txt")).unwrap().contains("Average virtual price"));
}

#[test]
fn zero_theta_report_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("synth.json"), SMALL).unwrap();
    ok(d, &["generate", "--config", "synth.json", "--out", "gen"]);
    let mut params = load_params(d.join("gen/planted.json")).unwrap();
    params.theta.iter_mut().for_each(|t| *t = 0.0);
    params.phi = [0.0, 0.0];
    save_params(d.join("zero.json"), &params).unwrap();
    ok(d, &["report", "--model", "zero.json", "--pois", "gen/pois.jsonl", "--out", "rep"]);
    let report: Report = read(d.join("rep/report.json"));
    assert_eq!(report.attribute_preferences.len(), 5);
    assert!(report.attribute_preferences.iter().all(|a| a.share == 0.2));
    assert_eq!(report.distance_preferences.euclidean, 0.5);
}

#[test]
fn sweep_writes_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("synth.json"), SMALL).unwrap();
    ok(d, &["generate", "--config", "synth.json", "--out", "gen"]);
    ok(d, &["sweep", "--pois", "gen/pois.jsonl", "--radii", "0.5,1,3,5", "--max-epochs", "30", "--out", "sw"]);
    let curve: Curve = read(d.join("sw/curve.json"));
    assert_eq!(curve.points.len(), 4);
    assert!(curve.points.iter().any(|p| p.radius_km == curve.selected_radius_km));
    let degrees: Vec<f64> = curve.points.iter().map(|p| p.mean_degree).collect();
    assert!(degrees.windows(2).all(|w| w[0] <= w[1]), "{degrees:?}");
    for r in ["r0.5", "r1", "r3", "r5"] {
        assert!(d.join("sw").join(r).join("model.json").is_file());
    }
    assert_eq!(fs::read_to_string(d.join("sw/curve.txt")).unwrap().lines().count(), 6);
    assert_eq!(hedon(d, &["sweep", "--pois", "gen/pois.jsonl", "--radii", "1", "--out", "x"]).status.code(), Some(2));
}
