mod common;

use std::path::Path;

use chrono::NaiveDate;
use common::{exif_at, paint_view, snapshot, write_photo, Scene, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snowcover::photo::{classify_photos, run_photo_pipeline, Inputs};
use snowcover::webcam::run_webcam_pipeline;
use snowcover::{JobConfig, Store};
use snowcover_core::synthetic::pick_view;

const SEED: u64 = 3;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2026, 4, 10).unwrap()
}

fn end() -> NaiveDate {
    start() + chrono::Days::new(3)
}

/// One photo of the seed-3 world and a four-day webcam archive.
fn inputs(dir: &Path) -> JobConfig {
    let world = World::build(dir, SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (x0, y0) = pick_view(&world.pan, 400, 250, &mut rng);
    let img = paint_view(&world.pan, (x0, y0, 400, 250), 480, 300, 3000.0);
    write_photo(
        &dir.join("photos").join("view.jpg"),
        &img,
        &exif_at(world.geo.lat, world.geo.lon, 40.0),
    );
    Scene::ridge(120, 90).write_archive(
        &dir.join("webcams").join("cam"),
        start(),
        &[2300.0, 2350.0, 2400.0, 2450.0],
        &[0.0, 0.6, 0.0, 0.0],
        4,
        7,
    );
    world.cfg
}

fn run_all(cfg: &JobConfig) -> Store {
    let store = Store::open(&cfg.output_dir).unwrap();
    run_photo_pipeline(cfg, &store, &Inputs::load(cfg).unwrap()).unwrap();
    run_webcam_pipeline("cam", start(), end(), cfg, &store).unwrap();
    store
}

#[test]
fn same_inputs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = inputs(dir.path());
    cfg.output_dir = dir.path().join("run-a");
    let a = run_all(&cfg);
    cfg.output_dir = dir.path().join("run-b");
    cfg.workers = 1;
    let b = run_all(&cfg);

    let (sa, sb) = (snapshot(a.root()), snapshot(b.root()));
    assert!(sa.len() > 10, "only {} files written", sa.len());
    assert_eq!(
        sa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        sb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((path, x), (_, y)) in sa.iter().zip(&sb) {
        assert!(x == y, "{} differs between runs", path.display());
    }
}

#[test]
fn rerun_skips_finished_work_and_redoes_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = inputs(dir.path());
    let store = run_all(&cfg);
    let marker = b"left alone".to_vec();

    let photo = store.photo_dir("view");
    std::fs::write(photo.join("panorama.png"), &marker).unwrap();
    std::fs::remove_file(photo.join("mask.png")).unwrap();
    let day1 = store.webcam_day_dir("cam", start());
    let day3 = store.webcam_day_dir("cam", start() + chrono::Days::new(2));
    std::fs::write(day1.join("dmi.png"), &marker).unwrap();
    let dmi3 = std::fs::read(day3.join("dmi.png")).unwrap();
    std::fs::write(day3.join("dmi.png"), &marker).unwrap();
    std::fs::remove_file(day3.join("day.json")).unwrap();
    let series = std::fs::read(store.webcam_dir("cam").join("series.json")).unwrap();

    run_all(&cfg);

    // Aligned photo: not re-rendered. Missing mask: classified again.
    assert_eq!(std::fs::read(photo.join("panorama.png")).unwrap(), marker);
    assert!(photo.join("mask.png").exists());
    // Finished day untouched; the day without day.json is recomputed.
    assert_eq!(std::fs::read(day1.join("dmi.png")).unwrap(), marker);
    assert_eq!(std::fs::read(day3.join("dmi.png")).unwrap(), dmi3);
    assert!(day3.join("day.json").exists());
    assert_eq!(
        std::fs::read(store.webcam_dir("cam").join("series.json")).unwrap(),
        series
    );
}

#[test]
fn checkpoint_outlives_a_stale_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = inputs(dir.path());
    let store = Store::open(&cfg.output_dir).unwrap();
    let inputs = Inputs::load(&cfg).unwrap();
    snowcover::photo::ingest(&cfg, &store, &inputs).unwrap();
    let stale = std::fs::read(store.photo_index_path()).unwrap();
    snowcover::photo::align_photos(&cfg, &store, &inputs).unwrap();
    // A crash between the per-photo checkpoint and the index rewrite.
    std::fs::write(store.photo_index_path(), stale).unwrap();
    let marker = b"left alone".to_vec();
    std::fs::write(store.photo_dir("view").join("panorama.png"), &marker).unwrap();

    let records = classify_photos(&cfg, &store).unwrap();
    assert!(records[0].alignment.is_some());
    assert!(records[0].snow.is_some());
    assert_eq!(
        std::fs::read(store.photo_dir("view").join("panorama.png")).unwrap(),
        marker
    );
}
