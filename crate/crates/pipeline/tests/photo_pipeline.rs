mod common;

use common::{exif_at, known_mask, paint_view, write_photo, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snowcover::exif::ExifInfo;
use snowcover::photo::{current_records, run_photo_pipeline, Inputs, ScoreFile};
use snowcover::store::{RejectReason, Relevance};
use snowcover::Store;
use snowcover_core::imaging::Raster;
use snowcover_core::series::compute_svi;
use snowcover_core::synthetic::pick_view;

const SEED: u64 = 3;

fn median(mut v: Vec<f32>) -> f32 {
    v.sort_by(f32::total_cmp);
    v[v.len() / 2]
}

#[test]
fn aligned_photo_reports_the_painted_snow_line() {
    let dir = tempfile::tempdir().unwrap();
    let world = World::build(dir.path(), SEED);
    let pan = &world.pan;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (x0, y0) = pick_view(pan, 400, 250, &mut rng);
    let view = (x0, y0, 400, 250);
    let (w, h) = (640, 400);

    let (_, alt) = known_mask(pan, view, w, h, f32::INFINITY);
    let snow_alt = median(alt.iter().copied().filter(|a| a.is_finite()).collect());
    let (truth, alt) = known_mask(pan, view, w, h, snow_alt);
    let img = paint_view(pan, view, w, h, snow_alt);
    write_photo(
        &dir.path().join("photos").join("alpine.jpg"),
        &img,
        &exif_at(world.geo.lat, world.geo.lon, 40.0),
    );

    let cfg = world.cfg.clone();
    let store = Store::open(&cfg.output_dir).unwrap();
    let inputs = Inputs::load(&cfg).unwrap();
    let records = run_photo_pipeline(&cfg, &store, &inputs).unwrap();
    assert_eq!(records.len(), 1);
    let rec = &records[0];
    assert_eq!(rec.relevance, Relevance::Accepted, "flags: {:?}", rec.flags);

    let al = rec.alignment.as_ref().expect("photo aligned");
    let wrap = |d: i64| {
        d.rem_euclid(pan.width_px as i64)
            .min((-d).rem_euclid(pan.width_px as i64))
    };
    let ex = wrap(al.global.dx - x0 as i64);
    let ey = (al.global.dy - y0 as i64).abs();
    let err_deg = ((ex * ex + ey * ey) as f64).sqrt() * pan.deg_per_px;
    assert!(
        err_deg <= 0.3,
        "alignment off by {err_deg:.2} deg: {:?} vs ({x0}, {y0})",
        al.global
    );

    let snow = rec.snow.as_ref().expect("photo classified");
    assert_eq!((snow.width, snow.height), (w, h));
    let got = snow.svi.as_ref().expect("snow index");
    let bands = cfg.thresholds.bands;
    let want = compute_svi(&truth, &alt, bands, 1).unwrap();
    // Pixels inside the painted fade are mixtures the classifier may put on
    // either side, so the band holding the snow line can be off by a bit.
    for b in 0..bands {
        assert!(
            (got.svi[b] - want.svi[b]).abs() <= 0.2,
            "band {}: {:.3} vs {:.3}",
            b + 1,
            got.svi[b],
            want.svi[b]
        );
    }
    let span = (want.band_altitudes[bands] - want.band_altitudes[0]) / bands as f64;
    match (got.snow_line_m, want.snow_line_m) {
        (Some(g), Some(e)) => assert!((g - e).abs() <= span, "snow line {g:.0} m vs {e:.0} m"),
        other => panic!("snow lines differ: {other:?}"),
    }

    let dir_out = store.photo_dir("alpine");
    for f in [
        "panorama.png",
        "panorama.json",
        "terrain.f32",
        "classified.png",
        "mask.png",
        "scores.json",
    ] {
        assert!(dir_out.join(f).exists(), "{f} missing");
    }
    let scores: ScoreFile = serde_json::from_slice(&std::fs::read(dir_out.join("scores.json")).unwrap()).unwrap();
    assert_eq!(scores.scores.len(), w * h);
}

#[test]
fn ingestion_sorts_photos_by_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let world = World::build(dir.path(), SEED);
    let photos = dir.path().join("photos");
    let img = Raster::filled(64, 48, 3, 0.5);
    let at = exif_at(world.geo.lat, world.geo.lon, 40.0);

    write_photo(&photos.join("good.jpg"), &img, &at);
    let mut unknown_camera = at.clone();
    unknown_camera.make = Some("Other".into());
    write_photo(&photos.join("fallback.jpg"), &img, &unknown_camera);
    write_photo(
        &photos.join("nogps.jpg"),
        &img,
        &ExifInfo {
            latitude: None,
            longitude: None,
            ..at.clone()
        },
    );
    write_photo(
        &photos.join("nofocal.jpg"),
        &img,
        &ExifInfo {
            focal_length_mm: None,
            ..at.clone()
        },
    );
    write_photo(&photos.join("far.jpg"), &img, &exif_at(40.0, 5.0, 40.0));
    std::fs::write(photos.join("broken.jpg"), b"not a jpeg").unwrap();

    let cfg = world.cfg.clone();
    let store = Store::open(&cfg.output_dir).unwrap();
    snowcover::photo::ingest(&cfg, &store, &Inputs::load(&cfg).unwrap()).unwrap();
    let recs = current_records(&store).unwrap();
    let get = |id: &str| {
        recs.iter()
            .find(|r| r.id == id)
            .unwrap_or_else(|| panic!("{id} missing"))
    };

    assert_eq!(get("good").relevance, Relevance::Accepted);
    assert!(get("good").flags.is_empty());
    let meta = get("good").meta.as_ref().unwrap();
    assert!(meta.sensor_width_mm == common::SENSOR_MM);
    assert_eq!(get("fallback").relevance, Relevance::Accepted);
    assert!(get("fallback").flags.iter().any(|f| f == "fallback_sensor_width"));
    assert_eq!(get("nogps").relevance, Relevance::Rejected(RejectReason::NoGeotag));
    assert_eq!(
        get("nofocal").relevance,
        Relevance::Rejected(RejectReason::NoFocalLength)
    );
    assert_eq!(get("far").relevance, Relevance::Rejected(RejectReason::OutsideDem));
    assert_eq!(get("broken").relevance, Relevance::Rejected(RejectReason::Decode));
}
