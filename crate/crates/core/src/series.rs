//! Daily snow-mask series: gap filling, spatio-temporal smoothing, the Snow
//! Vector Index (SVI) and the snow-line altitude.

use serde::{Deserialize, Serialize};

use crate::classify::{SnowLabel, SnowMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Interpolated,
    /// No good-weather data and not yet filled.
    Missing,
}

/// One optional mask per day; day `i` (1-based) is `masks[i - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSeries {
    pub webcam_id: String,
    pub masks: Vec<Option<SnowMask>>,
    pub provenance: Vec<Provenance>,
}

impl MaskSeries {
    pub fn new(webcam_id: impl Into<String>, masks: Vec<Option<SnowMask>>) -> Result<Self> {
        let mut dims = None;
        for m in masks.iter().flatten() {
            match dims {
                None => dims = Some((m.width, m.height)),
                Some(d) if d != (m.width, m.height) => {
                    return Err(Error::DimensionMismatch("series masks differ in size".into()));
                }
                _ => {}
            }
        }
        let provenance = masks
            .iter()
            .map(|m| {
                if m.is_some() {
                    Provenance::Observed
                } else {
                    Provenance::Missing
                }
            })
            .collect();
        Ok(Self {
            webcam_id: webcam_id.into(),
            masks,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    fn gap_free(&self) -> Result<Vec<&SnowMask>> {
        self.masks
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("day {} has no mask", i + 1)))
            })
            .collect()
    }
}

/// How the two neighbours of a missing day are weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationWeighting {
    /// The nearer neighbour weighs more: `k₂/(k₁+k₂)` on the left one.
    #[default]
    Proximity,
    /// `k₁/(k₁+k₂)` on the left neighbour: the farther day weighs more.
    FarWeighted,
}

/// Soft label of a missing pixel from its left/right neighbours.
fn blend(left: SnowLabel, right: SnowLabel, w_left: f64) -> SnowLabel {
    let v = |l: SnowLabel| if l == SnowLabel::Snow { 1.0 } else { 0.0 };
    match (left, right) {
        (SnowLabel::Outside, SnowLabel::Outside) => SnowLabel::Outside,
        (SnowLabel::Outside, other) | (other, SnowLabel::Outside) => other,
        (l, r) => {
            if w_left * v(l) + (1.0 - w_left) * v(r) >= 0.5 {
                SnowLabel::Snow
            } else {
                SnowLabel::NoSnow
            }
        }
    }
}

/// Fills missing days from the nearest observed days on each side.
///
/// With a gap at distance `k₁` from the left neighbour and `k₂` from the
/// right one, each pixel gets a weighted vote thresholded at 0.5 (ties are
/// snow). Days with a neighbour on one side only copy it. A pixel outside
/// the mountain area in one neighbour takes the other neighbour's label.
pub fn interpolate_missing(series: &MaskSeries, weighting: InterpolationWeighting) -> Result<MaskSeries> {
    let observed: Vec<usize> = (0..series.len()).filter(|&i| series.masks[i].is_some()).collect();
    if observed.is_empty() {
        return Err(Error::Empty("series has no observed day".into()));
    }
    let mut out = series.clone();
    for i in 0..series.len() {
        if series.masks[i].is_some() {
            continue;
        }
        let left = observed.iter().rev().find(|&&j| j < i).copied();
        let right = observed.iter().find(|&&j| j > i).copied();
        let mask = match (left, right) {
            (Some(l), Some(r)) => {
                let (k1, k2) = ((i - l) as f64, (r - i) as f64);
                let w_left = match weighting {
                    InterpolationWeighting::Proximity => k2 / (k1 + k2),
                    InterpolationWeighting::FarWeighted => k1 / (k1 + k2),
                };
                let (a, b) = (series.masks[l].as_ref().unwrap(), series.masks[r].as_ref().unwrap());
                SnowMask {
                    width: a.width,
                    height: a.height,
                    labels: a
                        .labels
                        .iter()
                        .zip(&b.labels)
                        .map(|(x, y)| blend(*x, *y, w_left))
                        .collect(),
                }
            }
            (Some(j), None) | (None, Some(j)) => series.masks[j].clone().unwrap(),
            (None, None) => unreachable!("at least one observed day"),
        };
        out.masks[i] = Some(mask);
        out.provenance[i] = Provenance::Interpolated;
    }
    Ok(out)
}

/// Median of binary labels over a `(2s+1)×(2s+1)×(2t+1)` window, clipped to
/// the image, the series, and the mountain area. Ties resolve to snow.
pub fn spatiotemporal_median(series: &MaskSeries, s: usize, t: usize) -> Result<MaskSeries> {
    let masks = series.gap_free()?;
    let Some(first) = masks.first() else {
        return Ok(series.clone());
    };
    let (w, h, d) = (first.width, first.height, masks.len());
    let mut out = series.clone();
    for i in 0..d {
        let mut labels = masks[i].labels.clone();
        let days = i.saturating_sub(t)..=(i + t).min(d - 1);
        for y in 0..h {
            for x in 0..w {
                if masks[i].get(x, y) == SnowLabel::Outside {
                    continue;
                }
                let (mut snow, mut total) = (0usize, 0usize);
                for m in &masks[days.clone()] {
                    for yy in y.saturating_sub(s)..=(y + s).min(h - 1) {
                        for xx in x.saturating_sub(s)..=(x + s).min(w - 1) {
                            match m.get(xx, yy) {
                                SnowLabel::Snow => {
                                    snow += 1;
                                    total += 1;
                                }
                                SnowLabel::NoSnow => total += 1,
                                SnowLabel::Outside => {}
                            }
                        }
                    }
                }
                labels[y * w + x] = if 2 * snow >= total {
                    SnowLabel::Snow
                } else {
                    SnowLabel::NoSnow
                };
            }
        }
        out.masks[i] = Some(SnowMask {
            width: w,
            height: h,
            labels,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviRecord {
    /// 1-based day in the series.
    pub day_index: usize,
    /// Snow fraction per band, band 1 lowest in the image.
    pub svi: Vec<f64>,
    /// `A_1..A_N` (lowest altitude in each band) followed by `A_{N+1}`, the
    /// highest altitude of band N. NaN for bands without altitude data.
    #[serde(with = "crate::serde_float::nan_as_null")]
    pub band_altitudes: Vec<f64>,
    pub band_pixels: Vec<usize>,
    /// 1-based indices of bands with no mountain pixel (their SVI is 0).
    pub empty_bands: Vec<usize>,
    pub snow_line_m: Option<f64>,
}

/// Splits the mountain bounding box into `n` bands of equal pixel height
/// and measures the snow fraction and altitude range of each band.
pub fn compute_svi(mask: &SnowMask, altitude_m: &[f32], n: usize, day_index: usize) -> Result<SviRecord> {
    if altitude_m.len() != mask.width * mask.height {
        return Err(Error::DimensionMismatch(
            "altitude map differs in size from the mask".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("at least 2 bands are needed".into()));
    }
    let rows: Vec<usize> = (0..mask.height)
        .filter(|&y| (0..mask.width).any(|x| mask.get(x, y) != SnowLabel::Outside))
        .collect();
    let (Some(&top), Some(&bottom)) = (rows.first(), rows.last()) else {
        return Err(Error::Empty("mask has no mountain pixel".into()));
    };
    let height = bottom - top + 1;
    if n > height {
        return Err(Error::InvalidArgument(format!(
            "{n} bands exceed the mountain height of {height} rows"
        )));
    }
    let mut snow = vec![0usize; n];
    let mut pixels = vec![0usize; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for y in top..=bottom {
        // Row offset from the bottom of the box; band 0 is the bottom band.
        let from_bottom = bottom - y;
        let band = from_bottom * n / height;
        for x in 0..mask.width {
            let label = mask.get(x, y);
            if label == SnowLabel::Outside {
                continue;
            }
            pixels[band] += 1;
            snow[band] += (label == SnowLabel::Snow) as usize;
            let a = f64::from(altitude_m[y * mask.width + x]);
            if a.is_finite() {
                lo[band] = lo[band].min(a);
                hi[band] = hi[band].max(a);
            }
        }
    }
    let finite_or_nan = |v: f64| if v.is_finite() { v } else { f64::NAN };
    let svi: Vec<f64> = (0..n)
        .map(|b| {
            if pixels[b] == 0 {
                0.0
            } else {
                snow[b] as f64 / pixels[b] as f64
            }
        })
        .collect();
    let mut band_altitudes: Vec<f64> = lo.iter().map(|v| finite_or_nan(*v)).collect();
    band_altitudes.push(finite_or_nan(hi[n - 1]));
    let empty_bands = (0..n).filter(|&b| pixels[b] == 0).map(|b| b + 1).collect();
    let mut rec = SviRecord {
        day_index,
        svi,
        band_altitudes,
        band_pixels: pixels,
        empty_bands,
        snow_line_m: None,
    };
    rec.snow_line_m = snow_line(&rec, DEFAULT_SNOW_FRACTION);
    Ok(rec)
}

/// Default `s̄` for the snow line.
pub const DEFAULT_SNOW_FRACTION: f64 = 0.1;
pub const DEFAULT_BANDS: usize = 10;

/// `L = A_k + SVI_k·(A_{k+1} − A_k)` for the lowest band `k` from which every
/// band up to the top has `SVI ≥ s̄` (the band below, if any, being under
/// `s̄`). `None` when the top band is under `s̄` or an altitude is missing.
pub fn snow_line(rec: &SviRecord, s_bar: f64) -> Option<f64> {
    let n = rec.svi.len();
    let mut k = n;
    while k > 0 && rec.svi[k - 1] >= s_bar {
        k -= 1;
    }
    if k == n {
        return None;
    }
    let (a, b) = (rec.band_altitudes[k], rec.band_altitudes[k + 1]);
    let l = a + rec.svi[k] * (b - a);
    l.is_finite().then_some(l)
}

/// Sliding median over `window` days (`i − ⌊(w−1)/2⌋ ..= i + ⌊w/2⌋`, clipped),
/// skipping missing days; even counts average the two middle values.
pub fn smooth_series(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let back = window.saturating_sub(1) / 2;
    let fwd = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(values.len() - 1);
            let mut w: Vec<f64> = values[lo..=hi].iter().flatten().copied().collect();
            if w.is_empty() {
                return None;
            }
            w.sort_by(f64::total_cmp);
            let m = w.len();
            Some(if m % 2 == 1 {
                w[m / 2]
            } else {
                0.5 * (w[m / 2 - 1] + w[m / 2])
            })
        })
        .collect()
}

/// Least-squares slope of `(day, value)` over the present values.
pub fn trend_per_day(values: &[Option<f64>]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i as f64, v)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
