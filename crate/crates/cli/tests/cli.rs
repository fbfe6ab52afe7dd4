use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esn_plasticity::dataset::{save_dataset, Ratings, Subject, Trial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn esn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn esn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_run() -> Value {
    json!({
        "data": {"synthetic": {"trials_per_class": 10, "channels": 2, "samples": 256, "seed": 4}},
        "experiment": {
            "reservoir": {"reservoir_size": 40, "washout": 20},
            "scheme": {"kind": "lvhv"},
            "plasticity": {"rule": "ip", "epochs": 2},
            "pretrain_max_sequences": 4
        }
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn train_writes_report_and_model() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "exp.json", &small_run());
    let o = esn(&["train", "--config", "exp.json", "--out", "run1/"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty(), "machine output goes to files only");
    let report = read_json(&tmp.path().join("run1/report.json"));
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let confusion: Vec<Vec<u64>> = serde_json::from_value(report["confusion"].clone()).unwrap();
    assert_eq!(confusion.iter().flatten().sum::<u64>(), report["test_trials"].as_u64().unwrap());
    assert_eq!(report["data"]["synthetic"]["seed"], 4);
    assert_eq!(report["config"]["reservoir"]["input_dim"], 1);
    assert!(tmp.path().join("run1/model.json").exists());

    let o = esn(&["eval", "--model", "run1/model.json", "--config", "exp.json", "--out", "ev"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ev = read_json(&tmp.path().join("ev/report.json"));
    assert_eq!(ev["accuracy"], report["accuracy"]);
    assert_eq!(ev["predictions"], report["predictions"]);
}

#[test]
fn flag_overrides_reach_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "exp.json", &small_run());
    let o = esn(
        &["train", "--config", "exp.json", "--out", "o", "--seed", "9", "--rule", "none", "--mode", "offline"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&tmp.path().join("o/report.json"));
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config"]["split"]["seed"], 9);
    assert_eq!(r["config"]["plasticity"], Value::Null);
    assert_eq!(r["config"]["readout"]["mode"], "offline");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = esn(&["train", "--bogus"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&esn(&["frobnicate"], tmp.path())), 1);
    assert_eq!(code(&esn(&["--help"], tmp.path())), 0);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_run();
    cfg["experiment"]["reservoir"]["spectral_raduis"] = json!(0.9);
    write_config(tmp.path(), "exp.json", &cfg);
    let o = esn(&["train", "--config", "exp.json", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("spectral_raduis"), "{}", stderr(&o));
    let err = read_json(&tmp.path().join("o/error.json"));
    assert_eq!(err["exit_code"], 1);
}

#[test]
fn missing_data_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = esn(&["gen-synthetic", "--out", "ds"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::remove_file(tmp.path().join("ds/s01.labels.f32")).unwrap();
    let o = esn(&["train", "--data", "ds/manifest.json", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("s01.labels.f32"), "{}", stderr(&o));
    let o = esn(&["inspect", "--data", "ds/manifest.json"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn divergent_online_training_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_run();
    cfg["experiment"]["readout"] = json!({"mode": "online", "online": {"learning_rate": 1e6, "epochs": 50}});
    write_config(tmp.path(), "exp.json", &cfg);
    let o = esn(&["train", "--config", "exp.json", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(read_json(&tmp.path().join("o/error.json"))["kind"], "numerical");
}

#[test]
fn inspect_reports_generated_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = esn(
        &["gen-synthetic", "--out", "ds", "--scheme", "lvhv", "--seed", "2"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let o = esn(&["inspect", "--data", "ds/manifest.json", "--out", "ins"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("1 subjects, 120 trials, 8 channels"), "{text}");
    let ins = read_json(&tmp.path().join("ins/inspect.json"));
    let lvhv = ins["schemes"].as_array().unwrap().iter().find(|s| s["scheme"] == "lvhv").unwrap();
    assert_eq!(lvhv["counts"], json!([60, 60]));
}

#[test]
fn inspect_stress_calm_excludes_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = (0..50)
        .map(|_| {
            let r = Ratings::from_array([0; 4].map(|_| rng.random_range(1.0..9.0f32) as f64));
            Trial::new(1, 4, vec![0.0; 4], r).unwrap()
        })
        .collect();
    save_dataset(tmp.path(), &[Subject { id: "u".into(), trials }], 128).unwrap();
    let o = esn(&["inspect", "--data", "manifest.json", "--out", "."], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ins = read_json(&tmp.path().join("inspect.json"));
    let sc = ins["schemes"].as_array().unwrap().iter().find(|s| s["scheme"] == "stress_calm").unwrap();
    assert!(sc["labeled"].as_u64().unwrap() < 50);
    assert_eq!(sc["labeled"].as_u64().unwrap() + sc["unlabeled"].as_u64().unwrap(), 50);
}

#[test]
fn inspect_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let m = json!({"subjects": [], "channels": 0, "sample_rate_hz": 128, "samples_per_trial": 0, "trials_per_subject": 0});
    write_config(tmp.path(), "m.json", &m);
    let o = esn(&["inspect", "--data", "m.json"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("0 subjects"));
}

#[test]
fn sweep_emits_one_row_per_value_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_run();
    cfg["experiment"]["plasticity"] = Value::Null;
    write_config(tmp.path(), "exp.json", &cfg);
    let o = esn(
        &[
            "sweep", "--config", "exp.json", "--out", "sw", "--param", "spectral_radius",
            "--values", "0.1,0.85,1.1", "--seeds", "0,1", "--jobs", "2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "parameter,seed,accuracy,runtime_s");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.1,0,") && lines[6].starts_with("1.1,1,"));
    let doc = read_json(&tmp.path().join("sw/sweep.json"));
    let warned = doc["rows"][5]["report"]["warnings"].as_array().unwrap();
    assert!(!warned.is_empty(), "rho > 1 is flagged");
}

#[test]
fn extract_features_writes_both_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "exp.json", &small_run());
    let o = esn(&["extract-features", "--config", "exp.json", "--out", "f"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("f/features.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 3 + 2 * 4);
    assert_eq!(csv.lines().count(), 21);
    let doc = read_json(&tmp.path().join("f/features.json"));
    assert_eq!(doc["trials"].as_array().unwrap().len(), 20);
    assert_eq!(doc["data"]["synthetic"]["channels"], 2);
}

#[test]
fn source_files_are_left_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&esn(&["gen-synthetic", "--out", "ds"], tmp.path())), 0);
    let snapshot = |dir: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.clone(), std::fs::read(p).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let before = snapshot(&tmp.path().join("ds"));
    let cfg = json!({"data": {"manifest": "ds/manifest.json"}, "experiment": {"reservoir": {"reservoir_size": 30}, "scheme": {"kind": "lvhv"}}});
    write_config(tmp.path(), "exp.json", &cfg);
    assert_eq!(code(&esn(&["train", "--config", "exp.json", "--out", "o"], tmp.path())), 0);
    assert_eq!(code(&esn(&["inspect", "--data", "ds/manifest.json"], tmp.path())), 0);
    assert_eq!(before, snapshot(&tmp.path().join("ds")));
}
