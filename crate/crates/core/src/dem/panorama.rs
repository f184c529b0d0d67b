use std::io::Read;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geo::{destination, elevation_angle_deg, haversine_m, initial_bearing, GeoPoint};
use super::grid::DemGrid;
use crate::error::{invalid, Result};
use crate::imaging::{fold_direction, EdgeMap};

/// Named summit from the peak database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub name: String,
    pub position: GeoPoint,
    pub elevation_m: f64,
}

#[derive(Debug, Deserialize)]
struct PeakRow {
    name: String,
    lat: f64,
    lon: f64,
    elevation_m: f64,
}

/// Reads a `name,lat,lon,elevation_m` CSV (with header).
pub fn read_peaks_csv<R: Read>(reader: R) -> Result<Vec<Peak>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut peaks = Vec::new();
    for row in rdr.deserialize() {
        let row: PeakRow = row?;
        peaks.push(Peak {
            name: row.name,
            position: GeoPoint::new(row.lat, row.lon)?.with_elevation(row.elevation_m),
            elevation_m: row.elevation_m,
        });
    }
    Ok(peaks)
}

/// A peak placed on the panorama.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPeak {
    pub peak: Peak,
    pub column: usize,
    pub row: usize,
    pub distance_m: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    /// Pixels spanning 360° of azimuth.
    pub width_px: usize,
    pub max_distance_m: f64,
    /// Elevation angle of the top image border.
    pub top_elevation_deg: f64,
    /// Elevation angle of the bottom image border.
    pub bottom_elevation_deg: f64,
    /// Azimuth of column 0.
    pub azimuth_origin_deg: f64,
    /// Ray step as a fraction of the DEM ground resolution.
    pub step_fraction: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width_px: 3600,
            max_distance_m: 100_000.0,
            top_elevation_deg: 30.0,
            bottom_elevation_deg: -20.0,
            azimuth_origin_deg: 0.0,
            step_fraction: 0.5,
        }
    }
}

/// 360° cylindrical terrain rendering seen from one observer.
///
/// Column `c` looks along azimuth `azimuth_origin + c·deg_per_px`; the centre
/// of row `r` sits at elevation `top_elevation − (r + 0.5)·deg_per_px`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Panorama {
    pub width_px: usize,
    pub height_px: usize,
    pub deg_per_px: f64,
    pub top_elevation_deg: f64,
    pub azimuth_origin_deg: f64,
    pub observer: GeoPoint,
    pub step_m: f64,
    /// Topmost terrain row per column (`height_px` if the column is empty).
    pub skyline: Vec<usize>,
    /// Elevation angle of the upper terrain envelope per column.
    pub skyline_angle_deg: Vec<f64>,
    /// Distance to the visible terrain, `+∞` for sky pixels.
    pub depth_m: Vec<f32>,
    /// Altitude of the visible terrain, NaN for sky pixels.
    pub altitude_m: Vec<f32>,
    pub edges: EdgeMap,
    pub peaks: Vec<ProjectedPeak>,
}

impl Panorama {
    pub fn depth_at(&self, c: usize, r: usize) -> f32 {
        self.depth_m[r * self.width_px + c]
    }

    pub fn altitude_at(&self, c: usize, r: usize) -> f32 {
        self.altitude_m[r * self.width_px + c]
    }

    /// Fractional row of a given elevation angle (pixel-centre coordinates).
    pub fn row_of_angle(&self, elevation_deg: f64) -> f64 {
        (self.top_elevation_deg - elevation_deg) / self.deg_per_px - 0.5
    }

    pub fn column_of_azimuth(&self, azimuth_deg: f64) -> usize {
        let c = ((azimuth_deg - self.azimuth_origin_deg) / self.deg_per_px).round() as i64;
        c.rem_euclid(self.width_px as i64) as usize
    }
}

struct ColumnRender {
    top_row: usize,
    max_angle: f64,
    depth: Vec<f32>,
    altitude: Vec<f32>,
}

/// Ray-casts the DEM around `observer`.
///
/// Every column marches outward at a fixed step, converting samples to
/// elevation angles (curvature and refraction included); nearer terrain
/// claims pixel rows first, so each pixel records the closest visible surface.
pub fn render_panorama(dem: &DemGrid, observer: &GeoPoint, peaks: &[Peak], opts: &RenderOptions) -> Result<Panorama> {
    if opts.width_px < 360 {
        return Err(invalid("panorama width must be at least 360 px"));
    }
    if !(opts.top_elevation_deg > opts.bottom_elevation_deg) {
        return Err(invalid("panorama elevation range is empty"));
    }
    let surface = dem.elevation_at(observer)?;
    let eye = match observer.elevation_m {
        Some(h) if h >= surface => h,
        Some(h) => {
            info!("observer at {h:.1} m is below the terrain ({surface:.1} m); raising it");
            surface + 2.0
        }
        None => surface + 2.0,
    };
    let observer = GeoPoint {
        elevation_m: Some(eye),
        ..*observer
    };

    let width = opts.width_px;
    let dpp = 360.0 / width as f64;
    let height = ((opts.top_elevation_deg - opts.bottom_elevation_deg) / dpp).round() as usize;
    let step = opts.step_fraction * dem.ground_resolution_m();
    let top = opts.top_elevation_deg;

    let columns: Vec<ColumnRender> = (0..width)
        .into_par_iter()
        .map(|c| {
            let az = opts.azimuth_origin_deg + c as f64 * dpp;
            let mut col = ColumnRender {
                top_row: height,
                max_angle: f64::NEG_INFINITY,
                depth: vec![f32::INFINITY; height],
                altitude: vec![f32::NAN; height],
            };
            let mut i = 1usize;
            loop {
                let d = i as f64 * step;
                i += 1;
                if d > opts.max_distance_m {
                    break;
                }
                let (lat, lon) = destination(&observer, az, d);
                let Ok(h) = dem.elevation_at_latlon(lat, lon) else {
                    break;
                };
                let angle = elevation_angle_deg(h, eye, d);
                col.max_angle = col.max_angle.max(angle);
                let first = ((top - angle) / dpp - 0.5).ceil().max(0.0) as usize;
                if first < col.top_row {
                    for r in first..col.top_row {
                        col.depth[r] = d as f32;
                        col.altitude[r] = h as f32;
                    }
                    col.top_row = first;
                }
            }
            col
        })
        .collect();

    let mut depth_m = vec![f32::INFINITY; width * height];
    let mut altitude_m = vec![f32::NAN; width * height];
    let mut skyline = Vec::with_capacity(width);
    let mut skyline_angle_deg = Vec::with_capacity(width);
    for (c, col) in columns.into_iter().enumerate() {
        for r in 0..height {
            depth_m[r * width + c] = col.depth[r];
            altitude_m[r * width + c] = col.altitude[r];
        }
        skyline.push(col.top_row);
        skyline_angle_deg.push(col.max_angle);
    }

    let edges = depth_edges(&depth_m, width, height, 2.0 * step, opts.max_distance_m);
    let mut pan = Panorama {
        width_px: width,
        height_px: height,
        deg_per_px: dpp,
        top_elevation_deg: top,
        azimuth_origin_deg: opts.azimuth_origin_deg,
        observer,
        step_m: step,
        skyline,
        skyline_angle_deg,
        depth_m,
        altitude_m,
        edges,
        peaks: Vec::new(),
    };
    pan.peaks = project_peaks(dem, &pan, peaks, opts.max_distance_m);
    Ok(pan)
}

fn project_peaks(dem: &DemGrid, pan: &Panorama, peaks: &[Peak], max_distance: f64) -> Vec<ProjectedPeak> {
    let eye = pan.observer.elevation_m.unwrap_or(0.0);
    let mut out = Vec::new();
    for peak in peaks {
        let d = haversine_m(&pan.observer, &peak.position);
        if d < pan.step_m || d > max_distance {
            continue;
        }
        // Projection uses the DEM surface so peaks stay on the rendered terrain.
        let h = match dem.elevation_at(&peak.position) {
            Ok(h) => {
                if (h - peak.elevation_m).abs() > 200.0 {
                    warn!(
                        "peak {} listed at {:.0} m but DEM gives {:.0} m",
                        peak.name, peak.elevation_m, h
                    );
                }
                h
            }
            Err(_) => peak.elevation_m,
        };
        let az = initial_bearing(&pan.observer, &peak.position);
        let elev = elevation_angle_deg(h, eye, d);
        let row = pan.row_of_angle(elev).round();
        if row < 0.0 || row >= pan.height_px as f64 {
            continue;
        }
        out.push(ProjectedPeak {
            peak: peak.clone(),
            column: pan.column_of_azimuth(az),
            row: row as usize,
            distance_m: d,
            azimuth_deg: az,
            elevation_deg: elev,
        });
    }
    out
}

/// Marks terrain pixels whose 4-neighbour lies more than `jump` metres farther
/// (sky counts as infinitely far). Directions follow the discontinuity
/// contour, taken from the Sobel gradient of the log-depth field.
fn depth_edges(depth: &[f32], width: usize, height: usize, jump: f64, max_distance: f64) -> EdgeMap {
    let mut edges = EdgeMap::zeros(width, height);
    let far = (4.0 * max_distance).ln();
    let log_depth = |c: isize, r: isize| -> f64 {
        let c = c.rem_euclid(width as isize) as usize;
        let r = r.clamp(0, height as isize - 1) as usize;
        let d = f64::from(depth[r * width + c]);
        if d.is_finite() {
            d.max(1.0).ln()
        } else {
            far
        }
    };
    for r in 0..height {
        for c in 0..width {
            let d = f64::from(depth[r * width + c]);
            if !d.is_finite() {
                continue;
            }
            let neighbours = [
                Some(((c + width - 1) % width, r)),
                Some(((c + 1) % width, r)),
                r.checked_sub(1).map(|rr| (c, rr)),
                (r + 1 < height).then_some((c, r + 1)),
            ];
            let is_edge = neighbours.into_iter().flatten().any(|(nc, nr)| {
                let nd = f64::from(depth[nr * width + nc]);
                nd - d > jump
            });
            if !is_edge {
                continue;
            }
            let (ci, ri) = (c as isize, r as isize);
            let gx = (log_depth(ci + 1, ri - 1) + 2.0 * log_depth(ci + 1, ri) + log_depth(ci + 1, ri + 1))
                - (log_depth(ci - 1, ri - 1) + 2.0 * log_depth(ci - 1, ri) + log_depth(ci - 1, ri + 1));
            let gy = (log_depth(ci - 1, ri + 1) + 2.0 * log_depth(ci, ri + 1) + log_depth(ci + 1, ri + 1))
                - (log_depth(ci - 1, ri - 1) + 2.0 * log_depth(ci, ri - 1) + log_depth(ci + 1, ri - 1));
            let dir = if gx == 0.0 && gy == 0.0 {
                0.0
            } else {
                fold_direction(gy.atan2(gx) + std::f64::consts::FRAC_PI_2)
            };
            edges.set(c, r, 1.0, dir);
        }
    }
    edges
}
