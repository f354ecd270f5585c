use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drought_impacts::synthetic::{generate, SyntheticConfig};

const CONFIG: &str = r#"
[data]
usdm = "data/usdm.csv"
esi = "data/esi.csv"
dir = "data/dir.csv"
adjacency = "data/adjacency.csv"

[experiment]
categories = ["agriculture", "fire"]
index_sets = ["dsci"]
windows = [1, 8]
seed = 3

[gbdt]
num_rounds = 20

[forecast]
from = "2024-03-04"
to = "2024-05-27"
exclude = ["plants"]
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SyntheticConfig::new(5, 48, 21);
    cfg.start = "2024-01-01".parse().unwrap();
    generate(&cfg).unwrap().write_csvs(&dir.path().join("data")).unwrap();
    fs::write(dir.path().join("dip.toml"), CONFIG).unwrap();
    dir
}

fn dip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("dip runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn model_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn train_twice_gives_identical_models() {
    let dir = setup();
    let d = dir.path();
    ok(&dip(d, &["train", "--config", "dip.toml", "--seed", "7", "--out", "a"]));
    ok(&dip(d, &["--config", "dip.toml", "--seed", "7", "--out", "b", "--jobs", "1", "train"]));
    let a = model_files(&d.join("a/models"));
    assert_eq!(a.len(), 4);
    assert_eq!(a, model_files(&d.join("b/models")));
    assert_eq!(read(d.join("a/manifest-train.json")), read(d.join("b/manifest-train.json")));

    ok(&dip(d, &["train", "--config", "dip.toml", "--seed", "8", "--out", "c"]));
    assert_ne!(a, model_files(&d.join("c/models")));
}

#[test]
fn evaluate_matches_golden_table() {
    let dir = setup();
    let d = dir.path();
    ok(&dip(d, &["evaluate", "--config", "dip.toml"]));
    let got = read(d.join("out/evaluation.csv"));
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_evaluate.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, read(&golden));

    let entries: serde_json::Value = serde_json::from_str(&read(d.join("out/evaluation.json"))).unwrap();
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for e in entries {
        for key in ["category", "index_set", "window", "class0", "class1", "resample", "groups", "acceptable"] {
            assert!(e.get(key).is_some(), "entry lacks {key}");
        }
        let f1 = e["class1"]["f1"].as_f64().unwrap();
        assert_eq!(e["acceptable"].as_bool().unwrap(), f1 >= 0.5);
    }

    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("out/manifest-evaluate.json"))).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o["path"] == "evaluation.csv"));
}

#[test]
fn forecast_commands_after_training() {
    let dir = setup();
    let d = dir.path();
    let out = dip(d, &["forecast", "--config", "dip.toml"]);
    assert_eq!(out.status.code(), Some(1), "forecast without models");
    assert!(String::from_utf8_lossy(&out.stderr).contains("models"));

    ok(&dip(d, &["train", "--config", "dip.toml"]));
    ok(&dip(d, &["forecast", "--config", "dip.toml", "--target", "2024-06-03"]));
    let forecast = read(d.join("out/forecast.csv"));
    let mut lines = forecast.lines();
    assert_eq!(
        lines.next(),
        Some("target_week,county,category,window,lead_weeks,probability,label,available")
    );
    // 2 categories x 2 windows x 5 counties
    assert_eq!(lines.count(), 20);
    assert!(forecast.contains("2024-06-03,35001,agriculture,1:8,1,"));

    ok(&dip(d, &["forecast", "--config", "dip.toml"]));
    let monthly = read(d.join("out/forecast_monthly.csv"));
    assert!(monthly.starts_with("month,predicted_total,observed_total\n2024-03,"));
    assert!(monthly.lines().any(|l| l.starts_with("2024-05,")));

    ok(&dip(d, &["forecast-range", "--config", "dip.toml", "--target", "2024-06-03"]));
    let range = read(d.join("out/forecast_range.csv"));
    let row = range.lines().nth(1).unwrap();
    assert!(row.starts_with("2024-06-03,"));
    assert!(row.contains(r#""{""1:8"":"#), "{row}");

    ok(&dip(d, &["importance", "--config", "dip.toml"]));
    let imp: serde_json::Value = serde_json::from_str(&read(d.join("out/importance.json"))).unwrap();
    assert_eq!(imp.as_array().unwrap().len(), 4);
}

#[test]
fn ingest_and_export() {
    let dir = setup();
    let d = dir.path();
    ok(&dip(d, &["ingest", "--config", "dip.toml"]));
    let summary: serde_json::Value = serde_json::from_str(&read(d.join("out/ingest.json"))).unwrap();
    assert_eq!(summary["counties"], 5);
    assert_eq!(summary["weeks"], 48);
    assert_eq!(summary["first_week"], "2024-01-01");

    ok(&dip(d, &["panel-export", "--config", "dip.toml", "--features"]));
    let panel = read(d.join("out/panel.csv"));
    assert!(panel.starts_with("fips,week_start,dsci,esi,agriculture,water,fire,plants,relief,society,tourism\n"));
    assert_eq!(panel.lines().count(), 1 + 5 * 48);
    let header = read(d.join("out/features/fire_dsci_w8.csv"));
    assert!(header.starts_with("county,week,DI.target.8.dsci,"));
    assert!(d.join("out/features/fire_dsci_w8.json").exists());
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();

    let out = dip(d, &["train", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    assert_eq!(dip(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(dip(d, &["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(dip(d, &["train"]).status.code(), Some(1), "config is required");
    assert_eq!(dip(d, &["--help"]).status.code(), Some(0));
    assert_eq!(dip(d, &["--version"]).status.code(), Some(0));

    fs::write(d.join("bad.toml"), "[experiment]\nwindows = [9]\n").unwrap();
    assert_eq!(dip(d, &["train", "--config", "bad.toml"]).status.code(), Some(1));

    // output directory below a regular file cannot be created
    fs::write(d.join("blocker"), "").unwrap();
    let out = dip(d, &["ingest", "--config", "dip.toml", "--out", "blocker/out"]);
    assert_eq!(out.status.code(), Some(2));
}
