//! Photo pipeline: ingestion, panorama rendering, alignment and snow
//! classification, with one checkpoint file per photo so an interrupted run
//! resumes where it stopped.

use std::fs::File;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snowcover_core::alignment::{align_photo, compute_fov, photo_terrain, AlignmentResult, SensorDb};
use snowcover_core::classify::{downsample_for_classification, Classification, MountainMask};
use snowcover_core::dem::{load_dem_dir, read_peaks_csv, render_panorama, DemGrid, GeoPoint, Peak, ProjectedPeak};
use snowcover_core::imaging::{resize_mask, resize_nearest, BitMask, Raster};
use snowcover_core::series::compute_svi;

use crate::config::JobConfig;
use crate::error::{IoContext, PipelineError, Result};
use crate::imageio::{decode_rgb, encode_edges_png, encode_mask_png, encode_png};
use crate::ingest::{ingest_photos, RelevanceHook};
use crate::store::{PhotoRecord, SnowSummary, Store};

/// Terrain, peaks and camera data shared by every photo of a job.
pub struct Inputs {
    pub dem: DemGrid,
    pub peaks: Vec<Peak>,
    pub sensors: SensorDb,
}

impl Inputs {
    pub fn load(cfg: &JobConfig) -> Result<Self> {
        let dem = load_dem_dir(&cfg.dem_dir)?;
        let peaks = read_peaks_csv(File::open(&cfg.peaks_csv).at(&cfg.peaks_csv)?)?;
        let sensors = match &cfg.sensors_csv {
            Some(p) => SensorDb::from_csv(File::open(p).at(p)?)?,
            None => SensorDb::default(),
        };
        info!("DEM {}x{} samples, {} peaks", dem.rows, dem.cols, peaks.len());
        Ok(Self { dem, peaks, sensors })
    }
}

/// What `panorama.json` holds: the panorama without its per-pixel layers,
/// which go to `panorama.png` (edges) and `terrain.f32` (photo altitudes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaSummary {
    pub width_px: usize,
    pub height_px: usize,
    pub deg_per_px: f64,
    pub top_elevation_deg: f64,
    pub azimuth_origin_deg: f64,
    pub observer: GeoPoint,
    pub skyline: Vec<usize>,
    pub peaks: Vec<ProjectedPeak>,
}

/// `scores.json`: per-pixel classifier output, `null` outside the mountain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub classifier: String,
    pub threshold: f64,
    pub width: usize,
    pub height: usize,
    pub scores: Vec<Option<f64>>,
}

impl ScoreFile {
    pub fn new(classifier: &str, c: &Classification) -> Self {
        Self {
            classifier: classifier.to_string(),
            threshold: c.threshold,
            width: c.mask.width,
            height: c.mask.height,
            scores: c.scores.iter().map(|s| s.is_finite().then_some(*s)).collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.unwrap_or(f64::NAN)).collect()
    }
}

fn record_path(store: &Store, id: &str) -> std::path::PathBuf {
    store.photo_dir(id).join("record.json")
}

fn terrain_path(store: &Store, id: &str) -> std::path::PathBuf {
    store.photo_dir(id).join("terrain.f32")
}

fn checkpoint(store: &Store, rec: &PhotoRecord) -> Result<()> {
    store.write_json(&record_path(store, &rec.id), rec)
}

/// Index records, each replaced by its newer per-photo checkpoint if present.
pub fn current_records(store: &Store) -> Result<Vec<PhotoRecord>> {
    let mut records = store.load_photos()?;
    for r in records.iter_mut() {
        if let Some(newer) = store.read_json::<PhotoRecord>(&record_path(store, &r.id))? {
            *r = newer;
        }
    }
    Ok(records)
}

/// Scans the photo directory and writes the index. Records of photos that
/// were already processed are kept as they are.
pub fn ingest(cfg: &JobConfig, store: &Store, inputs: &Inputs) -> Result<Vec<PhotoRecord>> {
    let dir = cfg
        .photo_dir
        .as_ref()
        .ok_or_else(|| PipelineError::Config("photo_dir is not set".into()))?;
    let mut fresh = ingest_photos(dir, &inputs.dem, &inputs.sensors, cfg.thresholds.min_elevation_m)?;
    let hook = match &cfg.accept_list {
        Some(p) => RelevanceHook::from_list_file(p)?,
        None => RelevanceHook::AcceptAll,
    };
    hook.apply(&mut fresh);
    let known = current_records(store)?;
    let records: Vec<PhotoRecord> = fresh
        .into_iter()
        .map(|f| match known.iter().find(|k| k.id == f.id && k.path == f.path) {
            Some(k) if k.relevance == f.relevance => k.clone(),
            _ => f,
        })
        .collect();
    let accepted = records.iter().filter(|r| r.is_accepted()).count();
    info!("ingested {} photos, {accepted} accepted", records.len());
    store.save_photos(&records)?;
    Ok(records)
}

fn write_f32(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

/// Renders the panorama at the photo location and aligns the photo to it.
/// Failures are recorded as flags; the photo is then skipped downstream.
pub fn align_record(rec: &PhotoRecord, cfg: &JobConfig, store: &Store, inputs: &Inputs) -> Result<PhotoRecord> {
    let mut rec = rec.clone();
    if !rec.is_accepted() || rec.alignment.is_some() {
        return Ok(rec);
    }
    let Some(meta) = rec.meta.clone() else {
        return Ok(rec);
    };
    rec.flags.retain(|f| !f.starts_with("alignment_failed"));
    let outcome = (|| -> Result<(AlignmentResult, Vec<f32>)> {
        let pan = render_panorama(&inputs.dem, &meta.geo, &inputs.peaks, &cfg.render)?;
        let dir = store.photo_dir(&rec.id);
        store.write(&dir.join("panorama.png"), &encode_edges_png(&pan.edges)?)?;
        store.write_json(
            &dir.join("panorama.json"),
            &PanoramaSummary {
                width_px: pan.width_px,
                height_px: pan.height_px,
                deg_per_px: pan.deg_per_px,
                top_elevation_deg: pan.top_elevation_deg,
                azimuth_origin_deg: pan.azimuth_origin_deg,
                observer: pan.observer,
                skyline: pan.skyline.clone(),
                peaks: pan.peaks.clone(),
            },
        )?;
        let photo = decode_rgb(&std::fs::read(&rec.path).at(&rec.path)?)?;
        let result = align_photo(&photo, compute_fov(&meta)?, &pan, &cfg.align)?;
        let terrain = photo_terrain(&result, &pan);
        Ok((result, terrain.altitude_m))
    })();
    match outcome {
        Ok((result, altitude)) => {
            store.write(&terrain_path(store, &rec.id), &write_f32(&altitude))?;
            info!("{}: aligned at ({}, {})", rec.id, result.global.dx, result.global.dy);
            rec.alignment = Some(result);
        }
        Err(e) => {
            warn!("{}: alignment failed: {e}", rec.id);
            rec.flags.push(format!("alignment_failed: {e}"));
        }
    }
    checkpoint(store, &rec)?;
    Ok(rec)
}

/// Mountain pixels of the aligned photo: below its skyline and on terrain.
pub fn mountain_mask(result: &AlignmentResult, altitude: &[f32]) -> MountainMask {
    let w = result.photo_width;
    BitMask::from_fn(w, result.photo_height, |x, y| {
        !altitude[y * w + x].is_nan() && result.photo_skyline.row(x).is_some_and(|r| y >= r)
    })
}

/// Classifies an aligned photo and computes its snow cover per altitude band.
pub fn classify_record(rec: &PhotoRecord, cfg: &JobConfig, store: &Store) -> Result<PhotoRecord> {
    let mut rec = rec.clone();
    let dir = store.photo_dir(&rec.id);
    let done = rec.snow.is_some() && dir.join("mask.png").exists() && dir.join("scores.json").exists();
    let Some(al) = rec.alignment.clone() else {
        return Ok(rec);
    };
    if !rec.is_accepted() || done {
        return Ok(rec);
    }
    rec.flags.retain(|f| !f.starts_with("classification_failed"));
    let outcome = (|| -> Result<SnowSummary> {
        let tp = terrain_path(store, &rec.id);
        let altitude = read_f32(
            &store
                .read(&tp)?
                .ok_or_else(|| PipelineError::NotFound(tp.display().to_string()))?,
        );
        if altitude.len() != al.photo_width * al.photo_height {
            return Err(PipelineError::Invalid(format!(
                "{} does not match the alignment",
                tp.display()
            )));
        }
        let photo = decode_rgb(&std::fs::read(&rec.path).at(&rec.path)?)?;
        let small = downsample_for_classification(&photo)?;
        let (w, h) = (small.width(), small.height());
        let mountain = resize_mask(&mountain_mask(&al, &altitude), w, h);
        let altitude = resize_nearest(&altitude, al.photo_width, al.photo_height, w, h);
        let result = cfg.classifier.classify(&small, &mountain)?;
        store.write(&dir.join("classified.png"), &encode_png(&small)?)?;
        store.write(&dir.join("mask.png"), &encode_mask_png(&result.mask)?)?;
        store.write_json(
            &dir.join("scores.json"),
            &ScoreFile::new(cfg.classifier.name(), &result),
        )?;
        let svi = match compute_svi(&result.mask, &altitude, cfg.thresholds.bands, 1) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("{}: no snow index: {e}", rec.id);
                None
            }
        };
        let snow = result.mask.count(snowcover_core::classify::SnowLabel::Snow);
        let inside = mountain.count();
        Ok(SnowSummary {
            classifier: cfg.classifier.name().to_string(),
            width: w,
            height: h,
            snow_fraction: if inside == 0 { 0.0 } else { snow as f64 / inside as f64 },
            svi,
        })
    })();
    match outcome {
        Ok(s) => rec.snow = Some(s),
        Err(e) => {
            warn!("{}: classification failed: {e}", rec.id);
            rec.flags.push(format!("classification_failed: {e}"));
        }
    }
    checkpoint(store, &rec)?;
    Ok(rec)
}

fn run_stage(
    cfg: &JobConfig,
    store: &Store,
    stage: impl Fn(&PhotoRecord) -> Result<PhotoRecord> + Sync,
) -> Result<Vec<PhotoRecord>> {
    let records = current_records(store)?;
    let out = cfg
        .thread_pool()?
        .install(|| records.par_iter().map(&stage).collect::<Result<Vec<_>>>())?;
    store.save_photos(&out)?;
    Ok(out)
}

pub fn align_photos(cfg: &JobConfig, store: &Store, inputs: &Inputs) -> Result<Vec<PhotoRecord>> {
    run_stage(cfg, store, |r| align_record(r, cfg, store, inputs))
}

pub fn classify_photos(cfg: &JobConfig, store: &Store) -> Result<Vec<PhotoRecord>> {
    run_stage(cfg, store, |r| classify_record(r, cfg, store))
}

/// Ingest (first run only), align and classify every accepted photo.
pub fn run_photo_pipeline(cfg: &JobConfig, store: &Store, inputs: &Inputs) -> Result<Vec<PhotoRecord>> {
    if !store.photo_index_path().exists() {
        ingest(cfg, store, inputs)?;
    }
    align_photos(cfg, store, inputs)?;
    classify_photos(cfg, store)
}

/// Decoded classified image and mask of a processed photo.
pub fn load_classified(store: &Store, id: &str) -> Result<Option<(Raster, snowcover_core::classify::SnowMask)>> {
    let dir = store.photo_dir(id);
    match (
        store.read(&dir.join("classified.png"))?,
        store.read(&dir.join("mask.png"))?,
    ) {
        (Some(img), Some(mask)) => Ok(Some((decode_rgb(&img)?, crate::imageio::decode_mask_png(&mask)?))),
        _ => Ok(None),
    }
}

/// One row per photo: status, alignment, snow fraction, snow line and band SVIs.
pub fn photos_csv(records: &[PhotoRecord], bands: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "id",
        "relevance",
        "latitude",
        "longitude",
        "dx",
        "dy",
        "classifier",
        "snow_fraction",
        "snow_line_m",
        "flags",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=bands).map(|b| format!("svi_{b}")));
    w.write_record(&header)?;
    for r in records {
        let relevance = match r.relevance {
            crate::store::Relevance::Accepted => "accepted".to_string(),
            crate::store::Relevance::Unknown => "unknown".to_string(),
            crate::store::Relevance::Rejected(reason) => {
                format!(
                    "rejected:{}",
                    serde_json::to_value(reason)?.as_str().unwrap_or_default()
                )
            }
        };
        let num = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let svi = r.snow.as_ref().and_then(|s| s.svi.as_ref());
        let mut row = vec![
            r.id.clone(),
            relevance,
            num(r.exif.latitude),
            num(r.exif.longitude),
            r.alignment
                .as_ref()
                .map(|a| a.global.dx.to_string())
                .unwrap_or_default(),
            r.alignment
                .as_ref()
                .map(|a| a.global.dy.to_string())
                .unwrap_or_default(),
            r.snow.as_ref().map(|s| s.classifier.clone()).unwrap_or_default(),
            num(r.snow.as_ref().map(|s| s.snow_fraction)),
            num(svi.and_then(|s| s.snow_line_m)),
            r.flags.join("; "),
        ];
        row.extend((0..bands).map(|b| num(svi.and_then(|s| s.svi.get(b).copied()))));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| PipelineError::Invalid(e.to_string()))
}
