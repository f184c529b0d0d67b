//! Pixel-level snow classification over the mountain area.
//!
//! Five methods share one output shape: a per-pixel score (NaN outside the
//! mountain mask), a decision threshold, and the resulting [`SnowMask`]
//! where a pixel is snow iff its score reaches the threshold.

mod features;
mod gmm;
mod logistic;
mod rgbndsi;
mod threshold;

use serde::{Deserialize, Serialize};

pub use features::{extract_features, FEATURE_LEN, LOCAL_RADIUS_PX};
pub use gmm::{classify_gmm, fit_gmm, GaussianMixture, GmmParams};
pub use logistic::{classify_logistic, logistic_loss_grad, sigmoid, train_logistic, LogisticHyper, LogisticModel};
pub use rgbndsi::{classify_rgbndsi, rgbndsi_log_ratio, rgbndsi_values, RgbndsiThreshold, RGBNDSI_EPS};
pub use threshold::{
    blue_histogram, classify_fixed_threshold, classify_snow_nosnow, smooth_histogram, snow_nosnow_threshold,
    HISTOGRAM_BINS, SMOOTHING_WINDOW,
};

use crate::error::{Error, Result};
use crate::imaging::{resample, BitMask, Raster};

/// Mountain area `M`: pixels that may carry a snow label.
pub type MountainMask = BitMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnowLabel {
    Snow,
    NoSnow,
    Outside,
}

impl SnowLabel {
    /// Grey level used when masks are stored as images.
    pub fn to_byte(self) -> u8 {
        match self {
            SnowLabel::Snow => 255,
            SnowLabel::NoSnow => 0,
            SnowLabel::Outside => 128,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            255 => Some(SnowLabel::Snow),
            0 => Some(SnowLabel::NoSnow),
            128 => Some(SnowLabel::Outside),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnowMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<SnowLabel>,
}

impl SnowMask {
    pub fn outside(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![SnowLabel::Outside; width * height],
        }
    }

    /// Snow where `mountain` is set and `snow(x, y)` holds, no-snow elsewhere on `mountain`.
    pub fn from_fn(mountain: &MountainMask, mut snow: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::outside(mountain.width, mountain.height);
        for y in 0..mountain.height {
            for x in 0..mountain.width {
                if mountain.get(x, y) {
                    m.set(x, y, if snow(x, y) { SnowLabel::Snow } else { SnowLabel::NoSnow });
                }
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> SnowLabel {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: SnowLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn mountain(&self) -> MountainMask {
        BitMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|l| *l != SnowLabel::Outside).collect(),
        }
    }

    pub fn count(&self, label: SnowLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.to_byte()).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} mask",
                bytes.len()
            )));
        }
        let labels = bytes
            .iter()
            .map(|b| {
                SnowLabel::from_byte(*b)
                    .ok_or_else(|| Error::InvalidArgument(format!("mask value {b} is not one of 0, 128, 255")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { width, height, labels })
    }
}

/// Output of every classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub mask: SnowMask,
    /// Per-pixel score, NaN outside the mountain mask.
    pub scores: Vec<f64>,
    /// Snow iff `score >= threshold`.
    pub threshold: f64,
}

impl Classification {
    pub(crate) fn from_scores(mountain: &MountainMask, scores: Vec<f64>, threshold: f64) -> Self {
        let w = mountain.width;
        let mask = SnowMask::from_fn(mountain, |x, y| scores[y * w + x] >= threshold);
        Self {
            mask,
            scores,
            threshold,
        }
    }

    /// `(score, label)` pairs over the pixels where `truth` is inside the mountain area.
    pub fn scored_against(&self, truth: &SnowMask) -> Result<(Vec<f64>, Vec<bool>)> {
        if truth.width != self.mask.width || truth.height != self.mask.height {
            return Err(Error::DimensionMismatch("truth mask differs in size".into()));
        }
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (i, l) in truth.labels.iter().enumerate() {
            if *l != SnowLabel::Outside && !self.scores[i].is_nan() {
                scores.push(self.scores[i]);
                labels.push(*l == SnowLabel::Snow);
            }
        }
        Ok((scores, labels))
    }
}

pub(crate) fn check_mask(img: &Raster, mountain: &MountainMask) -> Result<()> {
    if img.width() != mountain.width || img.height() != mountain.height {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, mountain mask {}x{}",
            img.width(),
            img.height(),
            mountain.width,
            mountain.height
        )));
    }
    Ok(())
}

pub(crate) fn require_rgb(img: &Raster, method: &str) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument(format!("{method} needs an RGB image")));
    }
    Ok(())
}

/// Classifier choice together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    FixedThreshold { threshold: f64 },
    SnowNosnow { base_bin: usize },
    Rgbndsi { threshold: RgbndsiThreshold },
    Gmm(GmmParams),
    Logistic(LogisticModel),
}

impl ClassifierModel {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierModel::FixedThreshold { .. } => "fixed_threshold",
            ClassifierModel::SnowNosnow { .. } => "snow_nosnow",
            ClassifierModel::Rgbndsi { .. } => "rgbndsi",
            ClassifierModel::Gmm(_) => "gmm",
            ClassifierModel::Logistic(_) => "logistic",
        }
    }

    pub fn classify(&self, img: &Raster, mountain: &MountainMask) -> Result<Classification> {
        match self {
            ClassifierModel::FixedThreshold { threshold } => classify_fixed_threshold(img, mountain, *threshold),
            ClassifierModel::SnowNosnow { base_bin } => classify_snow_nosnow(img, mountain, *base_bin),
            ClassifierModel::Rgbndsi { threshold } => classify_rgbndsi(img, mountain, *threshold),
            ClassifierModel::Gmm(p) => classify_gmm(img, mountain, p),
            ClassifierModel::Logistic(model) => {
                let features = extract_features(img, mountain, LOCAL_RADIUS_PX)?;
                classify_logistic(model, mountain, &features, model.threshold)
            }
        }
    }
}

/// Target size of classified images.
pub const MAX_CLASSIFY_WIDTH: usize = 640;
pub const MAX_CLASSIFY_HEIGHT: usize = 480;

/// `k = min(1, max(640/w, 480/h))`.
pub fn classification_scale(width: usize, height: usize) -> f64 {
    let kx = MAX_CLASSIFY_WIDTH as f64 / width as f64;
    let ky = MAX_CLASSIFY_HEIGHT as f64 / height as f64;
    kx.max(ky).min(1.0)
}

pub fn downsample_for_classification(img: &Raster) -> Result<Raster> {
    let k = classification_scale(img.width(), img.height());
    if k >= 1.0 {
        return Ok(img.clone());
    }
    resample(img, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsampling_rule() {
        assert_eq!(classification_scale(1280, 960), 0.5);
        assert_eq!(classification_scale(320, 240), 1.0);
        assert_eq!(classification_scale(1280, 480), 1.0);
        let img = Raster::filled(1280, 960, 3, 0.3);
        let d = downsample_for_classification(&img).unwrap();
        assert_eq!((d.width(), d.height()), (640, 480));
        let small = Raster::filled(320, 240, 3, 0.3);
        assert_eq!(downsample_for_classification(&small).unwrap(), small);
    }

    #[test]
    fn mask_bytes_round_trip() {
        let m = SnowMask {
            width: 3,
            height: 1,
            labels: vec![SnowLabel::Snow, SnowLabel::Outside, SnowLabel::NoSnow],
        };
        assert_eq!(m.to_bytes(), vec![255, 128, 0]);
        assert_eq!(SnowMask::from_bytes(3, 1, &m.to_bytes()).unwrap(), m);
        assert!(SnowMask::from_bytes(3, 1, &[255, 7, 0]).is_err());
        assert!(SnowMask::from_bytes(2, 1, &[255, 0, 0]).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let models = [
            ClassifierModel::FixedThreshold { threshold: 0.5 },
            ClassifierModel::SnowNosnow { base_bin: 127 },
            ClassifierModel::Rgbndsi {
                threshold: RgbndsiThreshold::Auto,
            },
            ClassifierModel::Gmm(GmmParams::default()),
        ];
        for m in models {
            let json = serde_json::to_string(&m).unwrap();
            assert!(json.contains(&format!("\"kind\":\"{}\"", m.name())), "{json}");
            assert_eq!(serde_json::from_str::<ClassifierModel>(&json).unwrap(), m);
        }
    }
}
