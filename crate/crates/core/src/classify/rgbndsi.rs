//! RGB Normalized Difference Snow Index.
//!
//! With channels on the 0..255 scale:
//!
//! ```text
//! RGB      = (R + G + B) / 3
//! RGB_high = B³ / R³ · G³
//! τ        = mean of RGB_high over the mountain area
//! MIR      = τ⁴ · max(R, G, B) / RGB⁴
//! RGBNDSI  = (RGB − MIR) / (RGB + MIR)
//! ```
//!
//! On real images `MIR / RGB` is of order 10¹⁹, so the last line rounds to
//! −1 for every pixel in floating point. Classification therefore works on
//! `z = −½·ln(MIR / RGB)`, for which `RGBNDSI = tanh(z)` exactly; the
//! threshold is mapped through `atanh`.

use serde::{Deserialize, Serialize};

use super::threshold::snow_nosnow_threshold;
use super::{check_mask, require_rgb, Classification, MountainMask};
use crate::error::{Error, Result};
use crate::imaging::Raster;

/// Guard added to denominators that may be zero (black pixels, zero red).
pub const RGBNDSI_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RgbndsiThreshold {
    /// Snow iff RGBNDSI `>=` this value.
    Fixed(f64),
    /// Valley scan on the index histogram.
    Auto,
}

impl Default for RgbndsiThreshold {
    fn default() -> Self {
        RgbndsiThreshold::Fixed(0.0)
    }
}

fn channels255(img: &Raster, x: usize, y: usize) -> (f64, f64, f64) {
    let p = img.pixel(x, y);
    (255.0 * p[0], 255.0 * p[1], 255.0 * p[2])
}

fn rgb_high(r: f64, g: f64, b: f64) -> f64 {
    b.powi(3) / (r.powi(3) + RGBNDSI_EPS) * g.powi(3)
}

fn tau(img: &Raster, mountain: &MountainMask) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mountain.get(x, y) {
                let (r, g, b) = channels255(img, x, y);
                sum += rgb_high(r, g, b);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Empty("mountain mask is empty".into()));
    }
    Ok(sum / n as f64)
}

/// The index evaluated literally (NaN outside the mountain area).
pub fn rgbndsi_values(img: &Raster, mountain: &MountainMask) -> Result<Vec<f64>> {
    check_mask(img, mountain)?;
    require_rgb(img, "RGBNDSI")?;
    let t4 = tau(img, mountain)?.powi(4);
    Ok(per_pixel(img, mountain, |r, g, b| {
        let rgb = (r + g + b) / 3.0;
        let mir = t4 * r.max(g).max(b) / (rgb.powi(4) + RGBNDSI_EPS);
        (rgb - mir) / (rgb + mir + RGBNDSI_EPS)
    }))
}

/// `z = ½·ln(RGB / MIR)`, so that `RGBNDSI = tanh(z)` (NaN outside the mountain area).
pub fn rgbndsi_log_ratio(img: &Raster, mountain: &MountainMask) -> Result<Vec<f64>> {
    check_mask(img, mountain)?;
    require_rgb(img, "RGBNDSI")?;
    let ln_t4 = 4.0 * (tau(img, mountain)? + RGBNDSI_EPS).ln();
    Ok(per_pixel(img, mountain, |r, g, b| {
        let rgb = (r + g + b) / 3.0 + RGBNDSI_EPS;
        let max = r.max(g).max(b) + RGBNDSI_EPS;
        0.5 * (5.0 * rgb.ln() - ln_t4 - max.ln())
    }))
}

fn per_pixel(img: &Raster, mountain: &MountainMask, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            out.push(if mountain.get(x, y) {
                let (r, g, b) = channels255(img, x, y);
                f(r, g, b)
            } else {
                f64::NAN
            });
        }
    }
    out
}

/// Scores are the log-ratio `z`; the returned threshold is on the same scale.
pub fn classify_rgbndsi(img: &Raster, mountain: &MountainMask, threshold: RgbndsiThreshold) -> Result<Classification> {
    let z = rgbndsi_log_ratio(img, mountain)?;
    let t = match threshold {
        RgbndsiThreshold::Fixed(t) => {
            if t <= -1.0 {
                f64::NEG_INFINITY
            } else if t >= 1.0 {
                f64::INFINITY
            } else {
                t.atanh()
            }
        }
        RgbndsiThreshold::Auto => auto_threshold(&z),
    };
    Ok(Classification::from_scores(mountain, z, t))
}

/// Valley scan over 256 bins spanning the observed range of `z`, starting
/// from the middle bin.
fn auto_threshold(z: &[f64]) -> f64 {
    let (lo, hi) = z
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(hi > lo) {
        return lo;
    }
    let bins = super::HISTOGRAM_BINS;
    let width = (hi - lo) / (bins - 1) as f64;
    let mut hist = vec![0.0; bins];
    for v in z.iter().filter(|v| !v.is_nan()) {
        hist[((v - lo) / width).round() as usize] += 1.0;
    }
    let t = snow_nosnow_threshold(&hist, bins / 2 - 1);
    lo + (t as f64 - 0.5) * width
}
