//! Webcam frame screening, registration and daily aggregation.
//!
//! A frame is usable when enough of the reference skyline is visible in its
//! edge map. Usable frames of a day are registered against a reference edge
//! map and collapsed into a Daily Median Image (DMI).

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::alignment::Displacement;
use crate::error::{Error, Result};
use crate::imaging::{extract_edges, BitMask, EdgeMap, Raster, SkylinePath};

/// Fraction of the image height used as the skyline neighbourhood radius.
pub const SKYLINE_BAND_FRACTION: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WebcamParams {
    /// Minimum visibility score of a good-weather frame.
    pub min_visibility: f64,
    /// Edge strength at or above which a pixel counts as an edge.
    pub edge_threshold: f64,
    pub registration_window_px: usize,
    pub day_start: NaiveTime,
    pub day_end: NaiveTime,
}

impl Default for WebcamParams {
    fn default() -> Self {
        Self {
            min_visibility: 0.75,
            edge_threshold: 0.1,
            registration_window_px: 20,
            day_start: NaiveTime::from_hms_opt(9, 0, 0).expect("valid time"),
            day_end: NaiveTime::from_hms_opt(18, 0, 0).expect("valid time"),
        }
    }
}

/// Pixels within `τ = 0.04·height` (Euclidean) of the reference skyline.
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMask {
    pub tau_px: f64,
    pub bits: BitMask,
}

impl SkylineMask {
    pub fn width(&self) -> usize {
        self.bits.width
    }

    pub fn height(&self) -> usize {
        self.bits.height
    }
}

pub fn build_skyline_mask(reference: &SkylinePath, width: usize, height: usize) -> SkylineMask {
    let tau = SKYLINE_BAND_FRACTION * height as f64;
    let tau2 = tau * tau;
    let reach = tau.floor() as usize;
    let rows: Vec<Option<usize>> = (0..width)
        .map(|c| if c < reference.width() { reference.row(c) } else { None })
        .collect();
    // Only skyline points in columns within τ can be close enough.
    let bits = BitMask::from_fn(width, height, |x, y| {
        let lo = x.saturating_sub(reach);
        let hi = (x + reach).min(width.saturating_sub(1));
        (lo..=hi).any(|c| {
            rows[c].is_some_and(|r| {
                let dx = c as f64 - x as f64;
                let dy = r as f64 - y as f64;
                dx * dx + dy * dy <= tau2
            })
        })
    });
    SkylineMask { tau_px: tau, bits }
}

/// Fraction of skyline-mask columns in which the frame shows at least one edge.
pub fn visibility_score(frame: &Raster, mask: &SkylineMask, edge_threshold: f64) -> Result<f64> {
    if frame.width() != mask.width() || frame.height() != mask.height() {
        return Err(Error::DimensionMismatch(format!(
            "frame is {}x{}, skyline mask {}x{}",
            frame.width(),
            frame.height(),
            mask.width(),
            mask.height()
        )));
    }
    visibility_from_edges(&extract_edges(frame), mask, edge_threshold)
}

pub fn visibility_from_edges(edges: &EdgeMap, mask: &SkylineMask, edge_threshold: f64) -> Result<f64> {
    let (mut masked, mut visible) = (0usize, 0usize);
    for x in 0..mask.width() {
        let mut in_mask = false;
        let mut seen = false;
        for y in 0..mask.height() {
            if mask.bits.get(x, y) {
                in_mask = true;
                if edges.strength_at(x, y) >= edge_threshold {
                    seen = true;
                    break;
                }
            }
        }
        masked += in_mask as usize;
        visible += seen as usize;
    }
    if masked == 0 {
        return Err(Error::Empty("skyline mask has no pixels".into()));
    }
    Ok(visible as f64 / masked as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: NaiveDateTime,
    pub image: Raster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyBatch {
    pub webcam_id: String,
    pub date: NaiveDate,
    pub frames: Vec<Frame>,
}

impl DailyBatch {
    /// Keeps frames taken on `date` within the daytime window (inclusive),
    /// sorted by timestamp. All retained frames must share dimensions.
    pub fn new(
        webcam_id: impl Into<String>,
        date: NaiveDate,
        frames: Vec<Frame>,
        params: &WebcamParams,
    ) -> Result<Self> {
        let mut frames: Vec<Frame> = frames
            .into_iter()
            .filter(|f| {
                f.timestamp.date() == date
                    && f.timestamp.time() >= params.day_start
                    && f.timestamp.time() <= params.day_end
            })
            .collect();
        frames.sort_by_key(|f| f.timestamp);
        if let Some(first) = frames.first() {
            if let Some(bad) = frames.iter().find(|f| !f.image.same_shape(&first.image)) {
                return Err(Error::DimensionMismatch(format!(
                    "frame at {} differs in size from the first frame of {date}",
                    bad.timestamp
                )));
            }
        }
        Ok(Self {
            webcam_id: webcam_id.into(),
            date,
            frames,
        })
    }
}

/// Visibility score of every frame, in batch order.
pub fn visibility_scores(batch: &DailyBatch, mask: &SkylineMask, edge_threshold: f64) -> Result<Vec<f64>> {
    batch
        .frames
        .iter()
        .map(|f| visibility_score(&f.image, mask, edge_threshold))
        .collect()
}

/// Frames whose visibility is at least `min_visibility`, order preserved.
pub fn filter_good_weather(batch: &DailyBatch, mask: &SkylineMask, params: &WebcamParams) -> Result<DailyBatch> {
    let scores = visibility_scores(batch, mask, params.edge_threshold)?;
    let frames = batch
        .frames
        .iter()
        .zip(scores)
        .filter(|(_, v)| *v >= params.min_visibility)
        .map(|(f, _)| f.clone())
        .collect();
    Ok(DailyBatch {
        webcam_id: batch.webcam_id.clone(),
        date: batch.date,
        frames,
    })
}

/// Integer shift `(dx, dy)` such that `frame(x, y) ≈ reference(x − dx, y − dy)`.
///
/// Maximises the scalar cross-correlation `Σ ref(x, y)·frame(x + dx, y + dy)`
/// over `|dx|, |dy| ≤ window_px`; ties go to the shift closest to zero.
pub fn register_frame(frame: &EdgeMap, reference: &EdgeMap, window_px: usize) -> Result<Displacement> {
    if !frame.same_dims(reference) {
        return Err(Error::DimensionMismatch(format!(
            "frame edges {}x{}, reference {}x{}",
            frame.width, frame.height, reference.width, reference.height
        )));
    }
    let (w, h) = (frame.width as i64, frame.height as i64);
    let support: Vec<(i64, i64, f64)> = (0..reference.height)
        .flat_map(|y| (0..reference.width).map(move |x| (x, y)))
        .filter_map(|(x, y)| {
            let s = reference.strength_at(x, y);
            (s > 0.0).then_some((x as i64, y as i64, s))
        })
        .collect();
    let win = window_px as i64;
    let mut offsets: Vec<(i64, i64)> = (-win..=win)
        .flat_map(|dy| (-win..=win).map(move |dx| (dx, dy)))
        .collect();
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));

    let mut best = (0, 0, f64::NEG_INFINITY);
    for (dx, dy) in offsets {
        let mut score = 0.0;
        for &(x, y, s) in &support {
            let (tx, ty) = (x + dx, y + dy);
            if tx >= 0 && tx < w && ty >= 0 && ty < h {
                score += s * frame.strength[(ty * w + tx) as usize];
            }
        }
        if score > best.2 {
            best = (dx, dy, score);
        }
    }
    Ok(Displacement::new(best.0, best.1))
}

/// Undoes a registration shift: `out(x, y) = frame(x + dx, y + dy)` with
/// coordinates clamped to the border.
pub fn compensate_shift(frame: &Raster, shift: Displacement) -> Raster {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    Raster::from_fn(frame.width(), frame.height(), frame.channels(), |x, y, c| {
        let sx = (x as i64 + shift.dx).clamp(0, w - 1) as usize;
        let sy = (y as i64 + shift.dy).clamp(0, h - 1) as usize;
        frame.get(sx, sy, c)
    })
}

/// Per-pixel, per-channel temporal median; even counts take the lower median.
pub fn daily_median_image(frames: &[Raster]) -> Result<Raster> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Empty("no frames for the daily median image".into()))?;
    if frames.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::DimensionMismatch("frames differ in size".into()));
    }
    let n = frames.len();
    let k = n.div_ceil(2) - 1;
    let len = first.data().len();
    let mut out = Vec::with_capacity(len);
    let mut column = vec![0.0; n];
    for i in 0..len {
        for (slot, f) in column.iter_mut().zip(frames) {
            *slot = f.data()[i];
        }
        let (_, kth, _) = column.select_nth_unstable_by(k, f64::total_cmp);
        out.push(*kth);
    }
    Raster::new(first.width(), first.height(), first.channels(), out)
}

/// Outcome of one webcam day.
#[derive(Debug, Clone)]
pub struct DayResult {
    pub date: NaiveDate,
    pub visibility: Vec<f64>,
    pub kept: Vec<NaiveDateTime>,
    pub shifts: Vec<Displacement>,
    /// `None` when no frame passed the weather filter.
    pub dmi: Option<Raster>,
}

/// Filter, register and median-aggregate one day of frames.
pub fn process_day(
    batch: &DailyBatch,
    mask: &SkylineMask,
    reference_edges: &EdgeMap,
    params: &WebcamParams,
) -> Result<DayResult> {
    let visibility = visibility_scores(batch, mask, params.edge_threshold)?;
    let mut kept = Vec::new();
    let mut shifts = Vec::new();
    let mut registered = Vec::new();
    for (frame, v) in batch.frames.iter().zip(&visibility) {
        if *v < params.min_visibility {
            continue;
        }
        let shift = register_frame(
            &extract_edges(&frame.image),
            reference_edges,
            params.registration_window_px,
        )?;
        registered.push(compensate_shift(&frame.image, shift));
        kept.push(frame.timestamp);
        shifts.push(shift);
    }
    let dmi = if registered.is_empty() {
        None
    } else {
        Some(daily_median_image(&registered)?)
    };
    Ok(DayResult {
        date: batch.date,
        visibility,
        kept,
        shifts,
        dmi,
    })
}
