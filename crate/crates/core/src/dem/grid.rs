use std::fs;
use std::path::Path;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::geo::GeoPoint;
use crate::error::{invalid, Error, Result};

/// Void marker used by SRTM tiles.
pub const VOID: i16 = -32768;
/// Samples per side of an SRTM3 (3 arc-second) tile.
pub const SRTM3_SIDE: usize = 1201;
pub const SRTM3_SPACING_ARCSEC: f64 = 3.0;

/// One `.hgt` tile, identified by the integer coordinates of its SW corner.
#[derive(Debug, Clone)]
pub struct TileSource {
    pub lat: i32,
    pub lon: i32,
    pub bytes: Vec<u8>,
}

impl TileSource {
    pub fn from_path(path: &Path) -> Result<Self> {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| invalid(format!("bad tile path {}", path.display())))?;
        let (lat, lon) = parse_tile_name(stem)?;
        Ok(Self {
            lat,
            lon,
            bytes: fs::read(path)?,
        })
    }

    pub fn name(&self) -> String {
        tile_name(self.lat, self.lon)
    }
}

/// `N46E010` style name of the tile whose SW corner is `(lat, lon)`.
pub fn tile_name(lat: i32, lon: i32) -> String {
    format!(
        "{}{:02}{}{:03}",
        if lat >= 0 { 'N' } else { 'S' },
        lat.abs(),
        if lon >= 0 { 'E' } else { 'W' },
        lon.abs()
    )
}

pub fn parse_tile_name(name: &str) -> Result<(i32, i32)> {
    let bad = || invalid(format!("tile name {name:?} is not of the form N46E010"));
    let name = name.to_ascii_uppercase();
    if name.len() != 7 {
        return Err(bad());
    }
    let lat_sign = match &name[0..1] {
        "N" => 1,
        "S" => -1,
        _ => return Err(bad()),
    };
    let lon_sign = match &name[3..4] {
        "E" => 1,
        "W" => -1,
        _ => return Err(bad()),
    };
    let lat: i32 = name[1..3].parse().map_err(|_| bad())?;
    let lon: i32 = name[4..7].parse().map_err(|_| bad())?;
    Ok((lat_sign * lat, lon_sign * lon))
}

/// Geo-registered elevation raster, row 0 at the northern edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemGrid {
    /// NW corner sample.
    pub origin: GeoPoint,
    pub spacing_arcsec: f64,
    pub rows: usize,
    pub cols: usize,
    samples: Vec<f32>,
}

impl DemGrid {
    /// Builds a grid from row-major samples; values equal to [`VOID`] are filled.
    pub fn from_samples(
        origin: GeoPoint,
        spacing_arcsec: f64,
        rows: usize,
        cols: usize,
        samples: Vec<f32>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(invalid("a DEM needs at least 2x2 samples"));
        }
        if !(spacing_arcsec > 0.0) {
            return Err(invalid("DEM spacing must be positive"));
        }
        if samples.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} DEM needs {} samples, got {}",
                rows * cols,
                samples.len()
            )));
        }
        let mut grid = Self {
            origin,
            spacing_arcsec,
            rows,
            cols,
            samples,
        };
        grid.fill_voids()?;
        Ok(grid)
    }

    fn spacing_deg(&self) -> f64 {
        self.spacing_arcsec / 3600.0
    }

    pub fn lat_max(&self) -> f64 {
        self.origin.lat
    }

    pub fn lat_min(&self) -> f64 {
        self.origin.lat - (self.rows - 1) as f64 * self.spacing_deg()
    }

    pub fn lon_min(&self) -> f64 {
        self.origin.lon
    }

    pub fn lon_max(&self) -> f64 {
        self.origin.lon + (self.cols - 1) as f64 * self.spacing_deg()
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min() && lat <= self.lat_max() && lon >= self.lon_min() && lon <= self.lon_max()
    }

    #[inline]
    pub fn sample(&self, row: usize, col: usize) -> f64 {
        f64::from(self.samples[row * self.cols + col])
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// Latitude / longitude of a sample.
    pub fn sample_position(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.lat - row as f64 * self.spacing_deg(),
            self.origin.lon + col as f64 * self.spacing_deg(),
        )
    }

    /// Ground distance between adjacent samples along the shorter axis.
    pub fn ground_resolution_m(&self) -> f64 {
        let lat_m = self.spacing_deg().to_radians() * super::geo::EARTH_RADIUS_M;
        let mid_lat = 0.5 * (self.lat_min() + self.lat_max());
        lat_m * mid_lat.to_radians().cos().min(1.0)
    }

    /// Bilinear interpolation of the four surrounding samples.
    pub fn elevation_at(&self, p: &GeoPoint) -> Result<f64> {
        self.elevation_at_latlon(p.lat, p.lon)
    }

    pub fn elevation_at_latlon(&self, lat: f64, lon: f64) -> Result<f64> {
        if !self.contains(lat, lon) {
            return Err(Error::OutOfBounds { lat, lon });
        }
        let fr = snap((self.origin.lat - lat) / self.spacing_deg()).clamp(0.0, (self.rows - 1) as f64);
        let fc = snap((lon - self.origin.lon) / self.spacing_deg()).clamp(0.0, (self.cols - 1) as f64);
        let (r0, c0) = (
            (fr.floor() as usize).min(self.rows - 2),
            (fc.floor() as usize).min(self.cols - 2),
        );
        let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
        let top = self.sample(r0, c0) * (1.0 - tc) + self.sample(r0, c0 + 1) * tc;
        let bottom = self.sample(r0 + 1, c0) * (1.0 - tc) + self.sample(r0 + 1, c0 + 1) * tc;
        Ok(top * (1.0 - tr) + bottom * tr)
    }

    /// Iterative nearest-neighbour dilation: each pass fills every void that
    /// touches a valid sample with the mean of its valid 8-neighbours.
    fn fill_voids(&mut self) -> Result<()> {
        let void = f32::from(VOID);
        let mut remaining = self.samples.iter().filter(|v| **v == void).count();
        if remaining == 0 {
            return Ok(());
        }
        if remaining == self.samples.len() {
            return Err(Error::Degenerate("DEM contains only voids".into()));
        }
        debug!("filling {remaining} DEM voids");
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        while remaining > 0 {
            let mut updates = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if self.samples[(r * cols + c) as usize] != void {
                        continue;
                    }
                    let (mut sum, mut n) = (0.0f64, 0);
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            let (rr, cc) = (r + dr, c + dc);
                            if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= rows || cc >= cols {
                                continue;
                            }
                            let v = self.samples[(rr * cols + cc) as usize];
                            if v != void {
                                sum += f64::from(v);
                                n += 1;
                            }
                        }
                    }
                    if n > 0 {
                        updates.push(((r * cols + c) as usize, (sum / n as f64) as f32));
                    }
                }
            }
            remaining -= updates.len();
            for (i, v) in updates {
                self.samples[i] = v;
            }
        }
        Ok(())
    }
}

/// Grid coordinates within rounding noise of a sample snap onto it.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn decode_tile(tile: &TileSource) -> Result<Vec<i16>> {
    let expected = SRTM3_SIDE * SRTM3_SIDE * 2;
    if tile.bytes.len() != expected {
        return Err(Error::MalformedTile {
            name: tile.name(),
            expected,
            actual: tile.bytes.len(),
        });
    }
    Ok(tile
        .bytes
        .chunks_exact(2)
        .map(|b| i16::from_be_bytes([b[0], b[1]]))
        .collect())
}

/// Merges a contiguous rectangle of SRTM3 tiles; shared edge rows and
/// columns are stored once.
pub fn load_dem(tiles: &[TileSource]) -> Result<DemGrid> {
    if tiles.is_empty() {
        return Err(Error::Empty("no DEM tiles given".into()));
    }
    let lat_lo = tiles.iter().map(|t| t.lat).min().unwrap();
    let lat_hi = tiles.iter().map(|t| t.lat).max().unwrap();
    let lon_lo = tiles.iter().map(|t| t.lon).min().unwrap();
    let lon_hi = tiles.iter().map(|t| t.lon).max().unwrap();
    for lat in lat_lo..=lat_hi {
        for lon in lon_lo..=lon_hi {
            if !tiles.iter().any(|t| t.lat == lat && t.lon == lon) {
                return Err(Error::MissingTile(tile_name(lat, lon)));
            }
        }
    }
    let step = SRTM3_SIDE - 1;
    let n_lat = (lat_hi - lat_lo + 1) as usize;
    let n_lon = (lon_hi - lon_lo + 1) as usize;
    let rows = n_lat * step + 1;
    let cols = n_lon * step + 1;
    let mut samples = vec![f32::from(VOID); rows * cols];
    for tile in tiles {
        let data = decode_tile(tile)?;
        let row0 = (lat_hi - tile.lat) as usize * step;
        let col0 = (tile.lon - lon_lo) as usize * step;
        for r in 0..SRTM3_SIDE {
            let dst = (row0 + r) * cols + col0;
            for (c, v) in data[r * SRTM3_SIDE..(r + 1) * SRTM3_SIDE].iter().enumerate() {
                let slot = &mut samples[dst + c];
                // Keep the first non-void value on shared edges.
                if *slot == f32::from(VOID) {
                    *slot = f32::from(*v);
                }
            }
        }
    }
    let origin = GeoPoint {
        lat: f64::from(lat_hi + 1),
        lon: f64::from(lon_lo),
        elevation_m: None,
    };
    DemGrid::from_samples(origin, SRTM3_SPACING_ARCSEC, rows, cols, samples)
}

/// Loads every `*.hgt` file of a directory.
pub fn load_dem_dir(dir: &Path) -> Result<DemGrid> {
    let mut tiles = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("hgt"))
        {
            tiles.push(TileSource::from_path(&path)?);
        }
    }
    if tiles.is_empty() {
        warn!("no .hgt tiles in {}", dir.display());
    }
    load_dem(&tiles)
}

/// Encodes an SRTM3 tile (used by fixtures and the tile writer).
pub fn encode_tile(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_be_bytes()).collect()
}
