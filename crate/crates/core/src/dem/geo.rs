use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Standard atmospheric refraction coefficient.
pub const REFRACTION_COEFF: f64 = 0.13;

/// WGS84 position; `elevation_m` is filled from the DEM when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub elevation_m: Option<f64>,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(invalid(format!("latitude {lat} out of range")));
        }
        if !lon.is_finite() {
            return Err(invalid("longitude is not finite"));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
            elevation_m: None,
        })
    }

    pub fn with_elevation(mut self, elevation_m: f64) -> Self {
        self.elevation_m = Some(elevation_m);
        self
    }
}

/// Wraps a longitude onto `[-180, 180)`.
pub fn normalize_lon(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        -180.0
    } else {
        l
    }
}

/// Point reached by travelling `dist_m` along the great circle with the
/// given initial azimuth (degrees clockwise from north).
pub fn destination(from: &GeoPoint, azimuth_deg: f64, dist_m: f64) -> (f64, f64) {
    let (phi1, lambda1) = (from.lat.to_radians(), from.lon.to_radians());
    let theta = azimuth_deg.to_radians();
    let delta = dist_m / EARTH_RADIUS_M;
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.asin();
    let lambda2 = lambda1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
    (phi2.to_degrees(), normalize_lon(lambda2.to_degrees()))
}

/// Initial great-circle bearing in degrees, `[0, 360)`.
pub fn initial_bearing(from: &GeoPoint, to: &GeoPoint) -> f64 {
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dl = (to.lon - from.lon).to_radians();
    let y = dl.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

pub fn haversine_m(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Apparent drop of a target at ground distance `d` due to Earth curvature,
/// reduced by refraction.
pub fn curvature_drop(d: f64) -> f64 {
    d * d * (1.0 - REFRACTION_COEFF) / (2.0 * EARTH_RADIUS_M)
}

/// Elevation angle (degrees) of a target seen from `observer_h` metres.
pub fn elevation_angle_deg(target_h: f64, observer_h: f64, d: f64) -> f64 {
    (target_h - observer_h - curvature_drop(d)).atan2(d).to_degrees()
}
