use std::path::Path;
use std::process::{Command, Output};

use exiffi_core::{load_csv, load_model, Dataset, Forest};
use serde_json::Value;

fn exiffi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exiffi"))
        .current_dir(dir)
        .args(args)
        .env_remove("EXIFFI_OUT_DIR")
        .env_remove("EXIFFI_TREES")
        .env_remove("EXIFFI_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn synth(dir: &Path, kind: &str) -> String {
    let o = exiffi(dir, &["synth", "--kind", kind, "--seed", "1", "--out-dir", "data"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    format!("data/{kind}.csv")
}

#[test]
fn synth_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = exiffi(dir.path(), &["synth", "--kind", "half_moon", "--seed", "7", "--out-dir", "a"]);
    let b = exiffi(dir.path(), &["synth", "--kind", "half_moon", "--seed", "7", "--out-dir", "b"]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("half_moon.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn fit_reports_and_writes_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    let o = exiffi(dir.path(), &["fit", "--input", &csv, "--label-col", "label", "--out-dir", "fit"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("fit/report.json"));
    assert!(report["metrics"]["average_precision"].as_f64().unwrap() >= 0.9);
    assert_eq!(report["manifest"], "manifest.json");
    let model: Forest<f64> = load_model(dir.path().join("fit/model.bin")).unwrap();
    assert_eq!(model.trees().len(), 100);

    let scores: Dataset<f64> = load_csv(dir.path().join("fit/scores.csv"), Some("label")).unwrap();
    assert_eq!(scores.n_samples(), 525);
    let manifest = json(dir.path().join("fit/manifest.json"));
    assert_eq!(manifest["subcommand"], "fit");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn if_model_round_trips_into_explain() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    let fit = exiffi(
        dir.path(),
        &["fit", "--input", &csv, "--label-col", "label", "--mode", "if", "--trees", "100", "--out-dir", "fit"],
    );
    assert_eq!(code(&fit), 0);
    let o = exiffi(
        dir.path(),
        &["explain", "global", "--model", "fit/model.bin", "--input", &csv, "--label-col", "label", "--out-dir", "g"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = json(dir.path().join("g/gfi.json"));
    let top: Vec<u64> = g["ranking"].as_array().unwrap()[..2].iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(top.contains(&0) && top.contains(&1), "{top:?}");
    let topk: Dataset<f64> = load_csv(dir.path().join("g/gfi_top.csv"), None).unwrap();
    assert_eq!(topk.n_features(), 3);
}

#[test]
fn local_explanation_of_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "half_moon");
    assert_eq!(code(&exiffi(dir.path(), &["fit", "--input", &csv, "--label-col", "label", "--out-dir", "fit"])), 0);
    let o = exiffi(
        dir.path(),
        &["explain", "local", "--model", "fit/model.bin", "--input", &csv, "--label-col", "label", "--rows", "4", "--out-dir", "l"],
    );
    assert_eq!(code(&o), 0);
    let local = json(dir.path().join("l/local.json"));
    let rows = local["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let lfi = rows[0]["lfi"].as_array().unwrap();
    let norm = rows[0]["normalizer"].as_array().unwrap();
    for (l, n) in lfi.iter().zip(norm) {
        if n.as_f64().unwrap() > 0.0 {
            assert!(l.as_f64().unwrap() >= 1.0 - 1e-12);
        }
    }
    let table: Dataset<f64> = load_csv(dir.path().join("l/lfi.csv"), None).unwrap();
    assert_eq!(table.n_samples(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = exiffi(dir.path(), &["fit", "--input", "nowhere.csv"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nowhere.csv"));

    assert_eq!(code(&exiffi(dir.path(), &["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&exiffi(dir.path(), &["fit", "--input", "x.csv", "--mode", "forest"])), 1);

    let csv = synth(dir.path(), "xy_axis");
    assert_eq!(code(&exiffi(dir.path(), &["fit", "--input", &csv, "--label-col", "label", "--out-dir", "fit"])), 0);
    let same = exiffi(
        dir.path(),
        &["explain", "scoremap", "--model", "fit/model.bin", "--input", &csv, "--label-col", "label", "--feat-i", "2", "--feat-j", "2"],
    );
    assert_eq!(code(&same), 1);

    // the label column read as a feature: one feature too many
    let mismatch = exiffi(dir.path(), &["explain", "local", "--model", "fit/model.bin", "--input", &csv]);
    assert_eq!(code(&mismatch), 2);

    let no_model = exiffi(dir.path(), &["bench", "--model", "gone.bin", "--random-rows", "50", "--random-cols", "3"]);
    assert_eq!(code(&no_model), 2);

    std::fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n3,oops\n").unwrap();
    assert_eq!(code(&exiffi(dir.path(), &["profile", "--input", "bad.csv"])), 2);
}

#[test]
fn fs_with_supplied_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    std::fs::write(dir.path().join("rank.csv"), "feature\n0\n1\n2\n3\n4\n5\n").unwrap();
    let o = exiffi(
        dir.path(),
        &["fs", "--input", &csv, "--label-col", "label", "--ranking", "rank.csv", "--trees", "20", "--seeds", "2", "--out-dir", "fs"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.path().join("fs/fs.json"));
    assert_eq!(r["ranking"], serde_json::json!([0, 1, 2, 3, 4, 5]));
    assert_eq!(r["ranking_source"], "file");
    assert!(r["auc_fs"].as_f64().unwrap() > 0.0);
    let curves: Dataset<f64> = load_csv(dir.path().join("fs/fs_curves.csv"), None).unwrap();
    assert_eq!(curves.n_samples(), 6);

    std::fs::write(dir.path().join("dup.csv"), "feature\n0\n0\n2\n3\n4\n5\n").unwrap();
    let dup = exiffi(dir.path(), &["fs", "--input", &csv, "--label-col", "label", "--ranking", "dup.csv", "--trees", "5"]);
    assert_eq!(code(&dup), 1);
}

#[test]
fn contamination_ablation_has_nine_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    let o = exiffi(
        dir.path(),
        &["ablate", "--input", &csv, "--label-col", "label", "--param", "contamination", "--trees", "10", "--seeds", "1", "--out-dir", "ab"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: Dataset<f64> = load_csv(dir.path().join("ab/ablation.csv"), None).unwrap();
    assert_eq!(t.n_samples(), 9);
    assert_eq!(t.feature_names(), ["parameter_value", "mean", "std"]);
}

#[test]
fn bench_single_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let o = exiffi(
        dir.path(),
        &["bench", "--random-rows", "500", "--random-cols", "5", "--trees", "10", "--repeats", "1", "--out-dir", "b"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = json(dir.path().join("b/bench.json"));
    for phase in ["fit", "predict", "explain_single"] {
        assert_eq!(b[phase]["samples_s"].as_array().unwrap().len(), 1);
        assert_eq!(b[phase]["p95_s"], b[phase]["median_s"]);
    }
    assert!(b["table_row"]["explanation_time_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["fit", "--input", csv.as_str(), "--label-col", "label", "--out-dir", out];
        args.extend(extra);
        Command::new(env!("CARGO_BIN_EXE_exiffi"))
            .current_dir(dir.path())
            .args(&args)
            .env("EXIFFI_TREES", "7")
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&[], "env")), 0);
    assert_eq!(code(&run(&["--trees", "9"], "flag")), 0);
    let trees = |out: &str| json(dir.path().join(out).join("manifest.json"))["config"]["fit"]["forest"]["trees"].clone();
    assert_eq!(trees("env"), 7);
    assert_eq!(trees("flag"), 9);
}

#[test]
fn replay_rejects_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "xy_axis");
    assert_eq!(code(&exiffi(dir.path(), &["profile", "--input", &csv, "--out-dir", "p"])), 0);
    let ok = exiffi(dir.path(), &["replay", "p/manifest.json"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(
        std::fs::read(dir.path().join("p/pearson.csv")).unwrap(),
        std::fs::read(dir.path().join("p/replay/pearson.csv")).unwrap()
    );
    std::fs::write(dir.path().join(&csv), "x0,label\n1,0\n").unwrap();
    assert_eq!(code(&exiffi(dir.path(), &["replay", "p/manifest.json"])), 2);
}
