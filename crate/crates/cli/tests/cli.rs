use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
name = "tiny"
plant = "uuv"
formula = "G[0,30](y > 10 & y < 50)"
seed = 3

[partition]
lower = [12.0, 10.0]
upper = [22.0, 30.0]
steps = [5.0, 10.0]

[repair]
k = 10
max_iter = 20
region_attempts = 1
"#;

fn isar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isar")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_writes_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let o = isar(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = json(&out.join("report.json"));
    assert_eq!(report["regions"], 4);
    let row = &report["rows"][0];
    let total: u64 = ["verified", "unknown", "failed"].iter().map(|k| row[k].as_u64().unwrap()).sum();
    assert_eq!(total, 4);

    let regions = json(&out.join("regions_before.json"));
    let classes: Vec<&str> = regions["regions"].as_array().unwrap().iter().map(|r| r["class"].as_str().unwrap()).collect();
    assert_eq!(classes.iter().filter(|c| **c == "verified").count() as u64, row["verified"].as_u64().unwrap());
    assert_eq!(classes.iter().filter(|c| **c == "failed").count() as u64, row["failed"].as_u64().unwrap());

    let rendered = isar(&["report", out.join("report.json").to_str().unwrap()]);
    assert!(rendered.status.success());
    assert_eq!(String::from_utf8(rendered.stdout).unwrap(), fs::read_to_string(out.join("report.txt")).unwrap());

    let csv_path = tmp.path().join("plot.csv");
    let plot = isar(&[
        "plot-data",
        out.join("regions_before.json").to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(plot.status.success());
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines[1], "id,y_lower,h_lower,y_upper,h_upper,class");
    assert_eq!(lines.len(), 2 + 4);
}

#[test]
fn repair_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = isar(&["repair", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["report.json", "weights_final.json", "iteration_log.jsonl", "regions_after.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    assert!(!a.join("timing.json").exists());
}

#[test]
fn invalid_config_reports_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("k = 10", "k = 10\nsigma = 0.0"));
    let o = isar(&["verify", "--config", &cfg]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["format"], "isar-error");
    assert!(err["message"].as_str().unwrap().contains("repair.sigma"), "{err}");
}

#[test]
fn failed_run_leaves_an_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("seed = 3\n", "seed = 3\ncontroller = \"missing.json\"\n"));
    let out = tmp.path().join("run");
    let o = isar(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let record = json(&out.join("error.json"));
    assert_eq!(record["format"], "isar-error");
    assert_eq!(record, serde_json::from_slice::<Value>(&o.stderr).unwrap());
}

#[test]
fn show_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let first = isar(&["show-config", "--preset", "mc-small", "--seed", "17"]);
    assert!(first.status.success());
    let cfg = write_config(tmp.path(), std::str::from_utf8(&first.stdout).unwrap());
    let second = isar(&["show-config", "--config", &cfg]);
    assert_eq!(first.stdout, second.stdout);
    assert!(std::str::from_utf8(&first.stdout).unwrap().contains("seed = 17"));
}

#[test]
fn unknown_preset_fails() {
    let o = isar(&["verify", "--preset", "nope"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("isar-error"));
}
