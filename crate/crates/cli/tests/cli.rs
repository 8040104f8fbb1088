use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_biomarker-lab"));
    c.env_remove("BIOMARKER_LAB_OUT").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small cohort and cheap grids so the whole pipeline runs in seconds.
fn write_config(dir: &Path, input: &Path, counts: [usize; 4]) -> PathBuf {
    let cfg = json!({
        "input_dir": input,
        "stats": {"resamples": 200},
        "grids": {
            "gbt": [{"model": "gbt", "n_estimators": 10, "max_depth": 2}],
            "random_forest": [{"model": "random_forest", "n_trees": 10}]
        },
        "synth": {
            "n_per_category": {
                "socially_lonely": counts[0],
                "emotionally_lonely": counts[1],
                "both_lonely": counts[2],
                "not_lonely": counts[3]
            },
            "days": 7
        }
    });
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn synth(root: &Path, counts: [usize; 4]) -> (PathBuf, PathBuf) {
    let cohort = root.join("cohort");
    let cfg = write_config(root, &cohort, counts);
    let o = run(&["--config", cfg.to_str().unwrap(), "--out-dir", cohort.to_str().unwrap(), "synth"]);
    assert!(o.status.success(), "{}", stderr(&o));
    (cfg, cohort)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap()
}

fn output_digests(out: &Path) -> BTreeMap<String, Value> {
    let m = manifest(out);
    let mut all = BTreeMap::new();
    for (stage, rec) in m["stages"].as_object().unwrap() {
        for (file, digest) in rec["outputs"].as_object().unwrap() {
            all.insert(format!("{stage}:{file}"), digest.clone());
        }
    }
    all
}

#[test]
fn pipeline_writes_every_report_file_and_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let (cfg, _) = synth(root.path(), [5, 5, 5, 5]);
    let cfg = cfg.to_str().unwrap();
    let out_a = root.path().join("a");
    let out_b = root.path().join("b");
    for (out, jobs) in [(&out_a, "1"), (&out_b, "2")] {
        let o = run(&["--config", cfg, "--seed", "1", "--jobs", jobs, "--out-dir", out.to_str().unwrap(), "pipeline"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "report.md",
        "descriptives.md",
        "group_comparison.md",
        "group_comparison.csv",
        "normality.csv",
        "classification_table.md",
        "predictions.csv",
        "metrics.json",
        "labels.csv",
        "features_participant.csv",
        "shap_values_gbt.csv",
        "importance_gbt.md",
        "models/gbt.json",
        "run_manifest.json",
    ] {
        assert!(out_a.join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(out_a.join("report.md")).unwrap();
    for heading in ["## UCLA scores", "## Socially Lonely vs Emotionally Lonely", "## Classification", "## Feature importance: XGBoost"] {
        assert!(report.contains(heading), "report lacks {heading}");
    }
    let m = manifest(&out_a);
    assert_eq!(m["seed"], 1);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["prng"].as_str().unwrap().contains("chacha8"));
    assert_eq!(m["stages"].as_object().unwrap().len(), 8);
    assert_eq!(m["config_hash"], manifest(&out_b)["config_hash"]);
    let (da, db) = (output_digests(&out_a), output_digests(&out_b));
    assert!(da.len() > 20);
    assert_eq!(da, db);
}

#[test]
fn rerunning_one_stage_reproduces_its_files() {
    let root = tempfile::tempdir().unwrap();
    let (cfg, cohort) = synth(root.path(), [4, 4, 4, 4]);
    let (cfg, out) = (cfg.to_str().unwrap(), root.path().join("out"));
    let out_s = out.to_str().unwrap();
    for stage in [&["ingest", "--input", cohort.to_str().unwrap()][..], &["extract"], &["label"], &["stats"]] {
        let mut args = vec!["--config", cfg, "--out-dir", out_s];
        args.extend_from_slice(stage);
        let o = run(&args);
        assert!(o.status.success(), "{stage:?}: {}", stderr(&o));
    }
    let before = fs::read(out.join("group_comparison.csv")).unwrap();
    let features = fs::read(out.join("features_participant.csv")).unwrap();
    fs::remove_file(out.join("group_comparison.csv")).unwrap();
    fs::remove_file(out.join("features_participant.csv")).unwrap();
    assert_eq!(run(&["--config", cfg, "--out-dir", out_s, "stats"]).status.code(), Some(2));
    assert!(run(&["--config", cfg, "--out-dir", out_s, "extract"]).status.success());
    assert!(run(&["--config", cfg, "--out-dir", out_s, "stats"]).status.success());
    assert_eq!(fs::read(out.join("features_participant.csv")).unwrap(), features);
    assert_eq!(fs::read(out.join("group_comparison.csv")).unwrap(), before);
}

#[test]
fn single_member_group_is_a_validation_failure() {
    let root = tempfile::tempdir().unwrap();
    let (cfg, _) = synth(root.path(), [1, 4, 4, 4]);
    let out = root.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "pipeline"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("group too small for bootstrap"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_name_the_path() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("nowhere");
    let out = root.path().join("out");
    let o = run(&["--out-dir", out.to_str().unwrap(), "label", "--input", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(missing.join("ucla_post.csv").to_str().unwrap()), "{}", stderr(&o));

    let o = run(&["--out-dir", out.to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("features_participant.csv"), "{}", stderr(&o));
}

#[test]
fn bad_configuration_exits_two() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("run.json");
    fs::write(&cfg, r#"{"seeed": 3}"#).unwrap();
    let out = root.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "stats"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad config"));
    assert_eq!(run(&["--correction", "holm", "stats"]).status.code(), Some(2));
    assert_eq!(run(&["--jobs", "0", "--out-dir", out.to_str().unwrap(), "stats"]).status.code(), Some(2));
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let root = tempfile::tempdir().unwrap();
    let cohort = root.path().join("from_env");
    let cfg = write_config(root.path(), &cohort, [2, 2, 2, 2]);
    let o = bin().env("BIOMARKER_LAB_OUT", &cohort).args(["--config", cfg.to_str().unwrap(), "synth"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(cohort.join("manifest.json").is_file());
    assert!(cohort.join("run_manifest.json").is_file());
}
