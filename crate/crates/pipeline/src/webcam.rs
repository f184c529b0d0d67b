//! Webcam pipeline: daily median images, classification, gap filling and the
//! snow-line series.
//!
//! Inputs for webcam `<id>` under the configured webcam directory:
//!
//! ```text
//! <id>/reference_skyline.json   skyline row per image column, e.g. [212, 211, ...]
//! <id>/altitude.json            {"width": W, "height": H, "values": [m or null, ...]}
//! <id>/<YYYY-MM-DD>/<HHMMSS>.jpg
//! ```

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snowcover_core::alignment::Displacement;
use snowcover_core::classify::{MountainMask, SnowMask};
use snowcover_core::imaging::{extract_edges, BitMask, EdgeMap, Raster, SkylinePath};
use snowcover_core::series::{
    compute_svi, interpolate_missing, smooth_series, snow_line, spatiotemporal_median, trend_per_day,
    InterpolationWeighting, MaskSeries, Provenance, SviRecord,
};
use snowcover_core::webcam::{build_skyline_mask, process_day, DailyBatch, Frame, SkylineMask};

use crate::config::JobConfig;
use crate::error::{IoContext, PipelineError, Result};
use crate::imageio::{decode_mask_png, decode_rgb, encode_mask_png, encode_png};
use crate::ingest::list_jpegs;
use crate::store::{validate_id, Store};

/// Per-pixel terrain altitude of a fixed webcam view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Option<f32>>,
}

/// Everything that stays fixed for one webcam.
#[derive(Debug, Clone)]
pub struct WebcamSetup {
    pub width: usize,
    pub height: usize,
    pub skyline: SkylinePath,
    pub skyline_mask: SkylineMask,
    /// Edges of a sky/terrain silhouette cut at the reference skyline, the
    /// registration target. Built with the same operator as frame edges so a
    /// sharp skyline lines up with itself at zero shift.
    pub reference_edges: EdgeMap,
    /// Altitude per pixel, NaN where unknown.
    pub altitude: Vec<f32>,
    /// Below the skyline with a known altitude.
    pub mountain: MountainMask,
}

impl WebcamSetup {
    pub fn new(skyline_rows: Vec<usize>, altitude: &AltitudeMap) -> Result<Self> {
        let (w, h) = (altitude.width, altitude.height);
        if altitude.values.len() != w * h || w == 0 || h == 0 {
            return Err(PipelineError::Invalid(format!(
                "altitude map holds {} values for {w}x{h}",
                altitude.values.len()
            )));
        }
        if skyline_rows.len() != w {
            return Err(PipelineError::Invalid(format!(
                "reference skyline has {} columns, the view {w}",
                skyline_rows.len()
            )));
        }
        if let Some(r) = skyline_rows.iter().find(|r| **r >= h) {
            return Err(PipelineError::Invalid(format!(
                "skyline row {r} lies outside the {h}-row view"
            )));
        }
        let skyline = SkylinePath::from_rows(skyline_rows);
        let silhouette = Raster::from_fn(w, h, 1, |x, y, _| {
            if skyline.row(x).is_some_and(|r| y < r) {
                1.0
            } else {
                0.0
            }
        });
        let reference_edges = extract_edges(&silhouette);
        let altitude: Vec<f32> = altitude.values.iter().map(|v| v.unwrap_or(f32::NAN)).collect();
        let mountain = BitMask::from_fn(w, h, |x, y| {
            !altitude[y * w + x].is_nan() && skyline.row(x).is_some_and(|r| y >= r)
        });
        Ok(Self {
            width: w,
            height: h,
            skyline_mask: build_skyline_mask(&skyline, w, h),
            skyline,
            reference_edges,
            altitude,
            mountain,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let sky_path = dir.join("reference_skyline.json");
        let alt_path = dir.join("altitude.json");
        let rows: Vec<usize> = serde_json::from_slice(&std::fs::read(&sky_path).at(&sky_path)?)?;
        let alt: AltitudeMap = serde_json::from_slice(&std::fs::read(&alt_path).at(&alt_path)?)?;
        Self::new(rows, &alt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub timestamp: NaiveDateTime,
    pub visibility: f64,
    /// Registration shift of frames that passed the weather filter.
    pub shift: Option<Displacement>,
}

/// `day.json`, written last for a day so its presence marks the day as done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub frames: Vec<FrameInfo>,
    /// Files that could not be read or named a time outside the day window.
    pub skipped: Vec<String>,
    /// Whether a DMI and mask were produced.
    pub observed: bool,
    pub classifier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDay {
    pub date: NaiveDate,
    pub provenance: Provenance,
    pub svi: SviRecord,
    pub snow_line_m: Option<f64>,
    pub smoothed_snow_line_m: Option<f64>,
}

/// `series.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebcamSeries {
    pub webcam_id: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub bands: usize,
    pub snow_fraction: f64,
    pub interpolation: InterpolationWeighting,
    pub smoothing_window: usize,
    pub days: Vec<SeriesDay>,
    /// Least-squares slope of the smoothed snow line, metres per day.
    pub trend_m_per_day: Option<f64>,
}

fn frame_time(path: &Path, date: NaiveDate) -> Option<NaiveDateTime> {
    let stem = path.file_stem()?.to_str()?;
    NaiveTime::parse_from_str(stem, "%H%M%S").ok().map(|t| date.and_time(t))
}

fn read_frames(dir: &Path, date: NaiveDate) -> Result<(Vec<Frame>, Vec<String>)> {
    let mut frames = Vec::new();
    let mut skipped = Vec::new();
    if !dir.is_dir() {
        return Ok((frames, skipped));
    }
    for path in list_jpegs(dir)? {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let Some(timestamp) = frame_time(&path, date) else {
            warn!("{}: file name is not HHMMSS", path.display());
            skipped.push(name);
            continue;
        };
        match std::fs::read(&path).at(&path).and_then(|b| decode_rgb(&b)) {
            Ok(image) => frames.push(Frame { timestamp, image }),
            Err(e) => {
                warn!("{}: {e}", path.display());
                skipped.push(name);
            }
        }
    }
    Ok((frames, skipped))
}

/// Processes one day unless its `day.json` already exists; returns the
/// day's classified DMI mask, if any.
fn run_day(
    id: &str,
    date: NaiveDate,
    source: &Path,
    setup: &WebcamSetup,
    cfg: &JobConfig,
    store: &Store,
) -> Result<Option<SnowMask>> {
    let out = store.webcam_day_dir(id, date);
    if let Some(done) = store.read_json::<DayRecord>(&out.join("day.json"))? {
        if !done.observed {
            return Ok(None);
        }
        if let Some(bytes) = store.read(&out.join("mask.png"))? {
            return Ok(Some(decode_mask_png(&bytes)?));
        }
    }
    let params = cfg.webcam_params();
    let (frames, mut skipped) = read_frames(&source.join(date.format("%Y-%m-%d").to_string()), date)?;
    let (frames, wrong_size): (Vec<Frame>, Vec<Frame>) = frames
        .into_iter()
        .partition(|f| f.image.width() == setup.width && f.image.height() == setup.height);
    skipped.extend(
        wrong_size
            .iter()
            .map(|f| format!("{} (wrong size)", f.timestamp.format("%H%M%S"))),
    );
    let batch = DailyBatch::new(id, date, frames, &params)?;
    let day = process_day(&batch, &setup.skyline_mask, &setup.reference_edges, &params)?;
    let mut shifts = day.kept.iter().zip(&day.shifts);
    let mut next = shifts.next();
    let frames = batch
        .frames
        .iter()
        .zip(&day.visibility)
        .map(|(f, v)| {
            let shift = match next {
                Some((t, s)) if *t == f.timestamp => {
                    next = shifts.next();
                    Some(*s)
                }
                _ => None,
            };
            FrameInfo {
                timestamp: f.timestamp,
                visibility: *v,
                shift,
            }
        })
        .collect();
    let mask = match &day.dmi {
        Some(dmi) => {
            let c = cfg.classifier.classify(dmi, &setup.mountain)?;
            store.write(&out.join("dmi.png"), &encode_png(dmi)?)?;
            store.write(&out.join("mask.png"), &encode_mask_png(&c.mask)?)?;
            Some(c.mask)
        }
        None => None,
    };
    info!("{id} {date}: {} of {} frames kept", day.kept.len(), batch.frames.len());
    store.write_json(
        &out.join("day.json"),
        &DayRecord {
            date,
            frames,
            skipped,
            observed: mask.is_some(),
            classifier: cfg.classifier.name().to_string(),
        },
    )?;
    Ok(mask)
}

pub fn days_between(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days().take_while(|d| *d <= to).collect()
}

/// Source directory of a webcam.
pub fn webcam_source(cfg: &JobConfig, id: &str) -> Result<PathBuf> {
    validate_id(id)?;
    let root = cfg
        .webcam_dir
        .as_ref()
        .ok_or_else(|| PipelineError::Config("webcam_dir is not set".into()))?;
    Ok(root.join(id))
}

/// Runs every day from `from` to `to` (inclusive) and writes the series.
pub fn run_webcam_pipeline(
    id: &str,
    from: NaiveDate,
    to: NaiveDate,
    cfg: &JobConfig,
    store: &Store,
) -> Result<WebcamSeries> {
    if to < from {
        return Err(PipelineError::Invalid(format!("{to} precedes {from}")));
    }
    let source = webcam_source(cfg, id)?;
    let setup = WebcamSetup::load(&source)?;
    let dates = days_between(from, to);
    let masks = cfg.thread_pool()?.install(|| {
        dates
            .par_iter()
            .map(|d| run_day(id, *d, &source, &setup, cfg, store))
            .collect::<Result<Vec<_>>>()
    })?;
    let series = build_series(id, &dates, masks, &setup, cfg, store)?;
    store.write_json(&store.webcam_dir(id).join("series.json"), &series)?;
    store.write(&store.webcam_dir(id).join("series.csv"), &series_csv(&series)?)?;
    Ok(series)
}

fn build_series(
    id: &str,
    dates: &[NaiveDate],
    masks: Vec<Option<SnowMask>>,
    setup: &WebcamSetup,
    cfg: &JobConfig,
    store: &Store,
) -> Result<WebcamSeries> {
    let raw = MaskSeries::new(id, masks)?;
    if raw.masks.iter().all(Option::is_none) {
        return Err(PipelineError::Invalid(format!(
            "webcam {id}: no good-weather day between {} and {}",
            dates[0],
            dates[dates.len() - 1]
        )));
    }
    let filled = interpolate_missing(&raw, cfg.webcam.interpolation)?;
    let filtered = spatiotemporal_median(&filled, cfg.webcam.median_spatial, cfg.webcam.median_temporal)?;
    let t = &cfg.thresholds;
    let mut days = Vec::with_capacity(dates.len());
    for (i, date) in dates.iter().enumerate() {
        let mask = filtered.masks[i]
            .as_ref()
            .ok_or_else(|| PipelineError::Invalid(format!("{date} is still missing after gap filling")))?;
        store.write(
            &store.webcam_day_dir(id, *date).join("filtered.png"),
            &encode_mask_png(mask)?,
        )?;
        let svi = compute_svi(mask, &setup.altitude, t.bands, i + 1)?;
        days.push(SeriesDay {
            date: *date,
            provenance: filled.provenance[i],
            snow_line_m: snow_line(&svi, t.snow_fraction),
            svi,
            smoothed_snow_line_m: None,
        });
    }
    let lines: Vec<Option<f64>> = days.iter().map(|d| d.snow_line_m).collect();
    let smoothed = smooth_series(&lines, cfg.webcam.smoothing_window);
    for (d, s) in days.iter_mut().zip(&smoothed) {
        d.smoothed_snow_line_m = *s;
    }
    Ok(WebcamSeries {
        webcam_id: id.to_string(),
        from: dates[0],
        to: dates[dates.len() - 1],
        bands: t.bands,
        snow_fraction: t.snow_fraction,
        interpolation: cfg.webcam.interpolation,
        smoothing_window: cfg.webcam.smoothing_window,
        trend_m_per_day: trend_per_day(&smoothed),
        days,
    })
}

/// One row per day: date, provenance, snow lines and the band SVIs.
pub fn series_csv(series: &WebcamSeries) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "date".to_string(),
        "provenance".into(),
        "snow_line_m".into(),
        "smoothed_snow_line_m".into(),
    ];
    header.extend((1..=series.bands).map(|b| format!("svi_{b}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_default();
    for d in &series.days {
        let provenance = match d.provenance {
            Provenance::Observed => "observed",
            Provenance::Interpolated => "interpolated",
            Provenance::Missing => "missing",
        };
        let mut row = vec![
            d.date.format("%Y-%m-%d").to_string(),
            provenance.to_string(),
            opt(d.snow_line_m),
            opt(d.smoothed_snow_line_m),
        ];
        row.extend(d.svi.svi.iter().map(|v| format!("{v:.6}")));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| PipelineError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_checks_shapes() {
        let alt = AltitudeMap {
            width: 3,
            height: 4,
            values: vec![Some(1000.0); 12],
        };
        assert!(WebcamSetup::new(vec![1, 1], &alt).is_err());
        assert!(WebcamSetup::new(vec![1, 4, 1], &alt).is_err());
        let s = WebcamSetup::new(vec![1, 2, 0], &alt).unwrap();
        assert_eq!(s.mountain.count(), 3 + 2 + 4);
    }

    #[test]
    fn reference_edges_straddle_the_skyline() {
        let alt = AltitudeMap {
            width: 5,
            height: 6,
            values: vec![Some(1000.0); 30],
        };
        let e = WebcamSetup::new(vec![3; 5], &alt).unwrap().reference_edges;
        for x in 0..5 {
            assert_eq!(e.strength_at(x, 2), e.strength_at(x, 3));
            assert!(e.strength_at(x, 2) > 0.0);
            for y in [0, 1, 4, 5] {
                assert_eq!(e.strength_at(x, y), 0.0);
            }
        }
    }

    #[test]
    fn frame_names() {
        let d = NaiveDate::from_ymd_opt(2014, 3, 1).unwrap();
        assert_eq!(
            frame_time(Path::new("x/093000.jpg"), d),
            Some(d.and_hms_opt(9, 30, 0).unwrap())
        );
        assert_eq!(frame_time(Path::new("x/noon.jpg"), d), None);
        assert_eq!(days_between(d, d.succ_opt().unwrap()).len(), 2);
    }
}
