use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Image with one (gray) or three (RGB) interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} raster needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("raster values must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value.clamp(0.0, 1.0); width * height * channels],
        }
    }

    /// Builds a raster from a per-pixel closure returning one value per channel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    /// 8-bit interleaved samples, mapping 0 to 0.0 and 255 to 1.0.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v.clamp(0.0, 1.0);
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Per-pixel edge strength in `[0, 1]` and undirected orientation in `[0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub strength: Vec<f64>,
    pub direction: Vec<f64>,
}

impl EdgeMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            strength: vec![0.0; width * height],
            direction: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn strength_at(&self, x: usize, y: usize) -> f64 {
        self.strength[y * self.width + x]
    }

    #[inline]
    pub fn direction_at(&self, x: usize, y: usize) -> f64 {
        self.direction[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, strength: f64, direction: f64) {
        let i = self.idx(x, y);
        self.strength[i] = strength;
        self.direction[i] = fold_direction(direction);
    }

    pub fn same_dims(&self, other: &EdgeMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`; columns wrap circularly.
    pub fn crop_wrapped(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<EdgeMap> {
        if y0 + h > self.height || w > self.width {
            return Err(invalid("crop window exceeds edge map"));
        }
        let mut out = EdgeMap::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let sx = (x0 + x) % self.width;
                let i = self.idx(sx, y0 + y);
                let o = out.idx(x, y);
                out.strength[o] = self.strength[i];
                out.direction[o] = self.direction[i];
            }
        }
        Ok(out)
    }

    /// Shifts every column by `s` (positive moves content to the right), wrapping.
    pub fn roll_columns(&self, s: i64) -> EdgeMap {
        let w = self.width as i64;
        let mut out = EdgeMap::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let nx = (x as i64 + s).rem_euclid(w) as usize;
                let i = self.idx(x, y);
                let o = out.idx(nx, y);
                out.strength[o] = self.strength[i];
                out.direction[o] = self.direction[i];
            }
        }
        out
    }
}

/// Folds an angle onto the undirected range `[0, π)`.
pub fn fold_direction(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let t = theta.rem_euclid(pi);
    if t >= pi {
        0.0
    } else {
        t
    }
}

/// Boolean per-pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}
