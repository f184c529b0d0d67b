use std::collections::HashMap;
use std::io::Read;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::dem::GeoPoint;
use crate::error::{invalid, Result};
use crate::imaging::{resize, Raster};

/// Sensor width assumed when the camera is not in the database (1/2.3").
pub const FALLBACK_SENSOR_WIDTH_MM: f64 = 6.17;
/// Narrowest photo accepted after rescaling to panorama resolution.
pub const MIN_SCALED_WIDTH_PX: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraMeta {
    pub focal_length_mm: f64,
    pub sensor_width_mm: f64,
    pub geo: GeoPoint,
    #[serde(default)]
    pub capture_time: Option<NaiveDateTime>,
    /// Set when the sensor width came from the fallback default.
    #[serde(default)]
    pub low_confidence_fov: bool,
}

/// Horizontal field of view in degrees.
pub fn compute_fov(meta: &CameraMeta) -> Result<f64> {
    fov_deg(meta.sensor_width_mm, meta.focal_length_mm)
}

pub fn fov_deg(sensor_width_mm: f64, focal_length_mm: f64) -> Result<f64> {
    if !(focal_length_mm > 0.0) || !(sensor_width_mm > 0.0) {
        return Err(invalid(format!(
            "focal length ({focal_length_mm}) and sensor width ({sensor_width_mm}) must be positive"
        )));
    }
    Ok(2.0 * (sensor_width_mm / (2.0 * focal_length_mm)).atan().to_degrees())
}

/// Rescales the photo so one pixel spans the same angle as in the panorama:
/// `new_width = round(fov / 360 · w_r)`, aspect ratio preserved.
pub fn scale_photo_to_panorama(photo: &Raster, fov_deg: f64, pan_width_px: usize) -> Result<Raster> {
    let (nw, nh) = scaled_size(photo.width(), photo.height(), fov_deg, pan_width_px)?;
    resize(photo, nw, nh)
}

pub fn scaled_size(width: usize, height: usize, fov_deg: f64, pan_width_px: usize) -> Result<(usize, usize)> {
    if !(fov_deg > 0.0 && fov_deg <= 360.0) {
        return Err(invalid(format!("field of view {fov_deg}° out of range")));
    }
    let nw = (fov_deg / 360.0 * pan_width_px as f64).round() as usize;
    if nw < MIN_SCALED_WIDTH_PX {
        return Err(invalid(format!("photo would be only {nw} px wide at panorama scale")));
    }
    let nh = ((height as f64 * nw as f64 / width as f64).round() as usize).max(1);
    Ok((nw, nh))
}

/// Sensor widths keyed by EXIF make and model (case-insensitive).
#[derive(Debug, Clone, Default)]
pub struct SensorDb {
    widths: HashMap<(String, String), f64>,
}

#[derive(Deserialize)]
struct SensorRow {
    make: String,
    model: String,
    sensor_width_mm: f64,
}

fn key(make: &str, model: &str) -> (String, String) {
    (make.trim().to_lowercase(), model.trim().to_lowercase())
}

impl SensorDb {
    /// Parses a `make,model,sensor_width_mm` CSV with header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut widths = HashMap::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: SensorRow = row?;
            widths.insert(key(&row.make, &row.model), row.sensor_width_mm);
        }
        Ok(Self { widths })
    }

    pub fn get(&self, make: &str, model: &str) -> Option<f64> {
        self.widths.get(&key(make, model)).copied()
    }

    /// Width for the camera, or the fallback with `low_confidence = true`.
    pub fn lookup(&self, make: &str, model: &str) -> (f64, bool) {
        match self.get(make, model) {
            Some(w) => (w, false),
            None => (FALLBACK_SENSOR_WIDTH_MM, true),
        }
    }
}
