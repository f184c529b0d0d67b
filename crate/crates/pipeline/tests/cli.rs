mod common;

use std::path::Path;
use std::process::Command;

use chrono::NaiveDate;
use common::{base_config, Scene};

fn snowcover(config: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_snowcover"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

/// Writes a job config with relative paths next to the inputs.
fn job(dir: &Path) -> std::path::PathBuf {
    let mut cfg = base_config(dir);
    cfg.dem_dir = "dem".into();
    cfg.peaks_csv = "peaks.csv".into();
    cfg.sensors_csv = Some("sensors.csv".into());
    cfg.photo_dir = Some("photos".into());
    cfg.webcam_dir = Some("webcams".into());
    cfg.output_dir = "store".into();
    let path = dir.join("job.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn missing_or_invalid_config_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(snowcover(&dir.path().join("absent.json"), &["ingest"]).0, 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"dem_dir": "dem", "peaks_csv": "p.csv", "output_dir": "o", "colour": 1}"#,
    )
    .unwrap();
    assert_eq!(snowcover(&bad, &["classify"]).0, 2);
}

#[test]
fn webcam_run_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = job(dir.path());
    let start = NaiveDate::from_ymd_opt(2026, 2, 1).unwrap();
    let scene = Scene::ridge(100, 80);
    scene.write_archive(
        &dir.path().join("webcams").join("clear"),
        start,
        &[2300.0; 3],
        &[0.0; 3],
        3,
        1,
    );
    scene.write_archive(
        &dir.path().join("webcams").join("fog"),
        start,
        &[2300.0; 3],
        &[0.7; 3],
        3,
        2,
    );
    let range = ["--from", "2026-02-01", "--to", "2026-02-03"];

    let (code, stdout) = snowcover(&config, &[&["webcam-run", "--id", "clear"][..], &range].concat());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("clear: 3 days"), "{stdout}");
    let (code, _) = snowcover(&config, &[&["webcam-run"][..], &range].concat());
    assert_eq!(code, 1);
    let (code, _) = snowcover(&config, &[&["webcam-run", "--id", "fog"][..], &range].concat());
    assert_eq!(code, 2);
    assert!(dir.path().join("store/webcams/clear/series.csv").exists());
}

#[test]
fn export_lists_ingested_photos() {
    let dir = tempfile::tempdir().unwrap();
    let config = job(dir.path());
    std::fs::write(dir.path().join("photos").join("junk.jpg"), b"no image").unwrap();
    // The empty DEM directory fails ingestion before any photo is read.
    assert_eq!(snowcover(&config, &["ingest"]).0, 2);

    common::World::build(dir.path(), 3);
    std::fs::write(dir.path().join("photos").join("junk.jpg"), b"no image").unwrap();
    let config = job(dir.path());
    assert_eq!(snowcover(&config, &["ingest"]).0, 0);
    let out = dir.path().join("photos.csv");
    assert_eq!(snowcover(&config, &["export-csv", "--out", out.to_str().unwrap()]).0, 0);
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("id,relevance,latitude,longitude"));
    assert!(lines.next().unwrap().starts_with("junk,rejected:decode"));
}
