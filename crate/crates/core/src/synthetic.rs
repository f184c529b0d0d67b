//! Procedural fixtures: terrains, perturbed edge maps and labelled images.
//!
//! Everything is seeded so fixtures are reproducible across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dem::{destination, DemGrid, GeoPoint, Panorama, Peak, RenderOptions};
use crate::error::Result;
use crate::imaging::{fold_direction, EdgeMap, Raster};

#[derive(Debug, Clone, Copy)]
pub struct TerrainParams {
    /// Samples per side (3 arc-second spacing).
    pub size: usize,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub base_m: f64,
    pub mountains: usize,
    /// Range of mountain distances from the observer.
    pub min_distance_m: f64,
    pub max_distance_m: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            size: 481,
            origin_lat: 46.3,
            origin_lon: 10.0,
            base_m: 800.0,
            mountains: 28,
            min_distance_m: 3_000.0,
            max_distance_m: 13_000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTerrain {
    pub dem: DemGrid,
    /// Centre of the grid, elevation unset.
    pub observer: GeoPoint,
    pub peaks: Vec<Peak>,
}

struct Bump {
    lat: f64,
    lon: f64,
    height: f64,
    sigma_m: f64,
    /// Ridge elongation and orientation.
    stretch: f64,
    angle: f64,
}

/// Gaussian massifs scattered around a central valley, plus ridge texture.
pub fn procedural_terrain(seed: u64, params: &TerrainParams) -> Result<SyntheticTerrain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.size;
    let spacing = 3.0 / 3600.0;
    let origin = GeoPoint::new(params.origin_lat, params.origin_lon)?;
    let half = (n - 1) as f64 / 2.0;
    let observer = GeoPoint::new(origin.lat - half * spacing, origin.lon + half * spacing)?;

    let bumps: Vec<Bump> = (0..params.mountains)
        .map(|_| {
            let az = rng.gen_range(0.0..360.0);
            let d = rng.gen_range(params.min_distance_m..params.max_distance_m);
            let (lat, lon) = destination(&observer, az, d);
            Bump {
                lat,
                lon,
                height: rng.gen_range(400.0..2200.0),
                sigma_m: rng.gen_range(700.0..2200.0),
                stretch: rng.gen_range(1.0..2.5),
                angle: rng.gen_range(0.0..std::f64::consts::PI),
            }
        })
        .collect();
    let waves: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let k = rng.gen_range(1.0 / 2500.0..1.0 / 400.0);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (
                k * theta.cos(),
                k * theta.sin(),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(15.0..60.0),
            )
        })
        .collect();

    let m_per_deg_lat = 111_195.0;
    let m_per_deg_lon = m_per_deg_lat * observer.lat.to_radians().cos();
    let height_at = |lat: f64, lon: f64| -> f64 {
        let y = (lat - observer.lat) * m_per_deg_lat;
        let x = (lon - observer.lon) * m_per_deg_lon;
        let mut h = params.base_m;
        for b in &bumps {
            let by = (lat - b.lat) * m_per_deg_lat;
            let bx = (lon - b.lon) * m_per_deg_lon;
            let (s, c) = b.angle.sin_cos();
            let u = (c * bx + s * by) / b.stretch;
            let v = -s * bx + c * by;
            h += b.height * (-(u * u + v * v) / (2.0 * b.sigma_m * b.sigma_m)).exp();
        }
        let ridge: f64 = waves
            .iter()
            .map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin())
            .sum();
        // Texture fades in with elevation so the valley floor stays smooth.
        h + ridge * ((h - params.base_m) / 800.0).clamp(0.0, 1.0)
    };

    let mut samples = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let lat = origin.lat - r as f64 * spacing;
            let lon = origin.lon + c as f64 * spacing;
            samples.push(height_at(lat, lon) as f32);
        }
    }
    let dem = DemGrid::from_samples(origin, 3.0, n, n, samples)?;
    let peaks = bumps
        .iter()
        .enumerate()
        .filter(|(_, b)| dem.contains(b.lat, b.lon))
        .map(|(i, b)| {
            let h = dem.elevation_at_latlon(b.lat, b.lon).unwrap_or(params.base_m);
            Peak {
                name: format!("peak-{i}"),
                position: GeoPoint {
                    lat: b.lat,
                    lon: b.lon,
                    elevation_m: Some(h),
                },
                elevation_m: h,
            }
        })
        .collect();
    Ok(SyntheticTerrain { dem, observer, peaks })
}

/// Panorama settings used by the closed-loop alignment fixtures.
pub fn fixture_render_options() -> RenderOptions {
    RenderOptions {
        width_px: 3600,
        max_distance_m: 25_000.0,
        top_elevation_deg: 35.0,
        bottom_elevation_deg: -15.0,
        ..RenderOptions::default()
    }
}

/// Top-left corner of a `width × height` view framing a visible peak (or
/// the highest stretch of skyline when no peak is visible), with some sky
/// above the skyline.
pub fn pick_view(pan: &Panorama, width: usize, height: usize, rng: &mut impl Rng) -> (usize, usize) {
    let w = pan.width_px;
    let visible: Vec<usize> = pan
        .peaks
        .iter()
        .filter(|p| p.row <= pan.skyline[p.column] + 2)
        .map(|p| p.column)
        .collect();
    let target = if visible.is_empty() {
        (0..w).min_by_key(|&c| pan.skyline[c]).unwrap_or(0)
    } else {
        visible[rng.gen_range(0..visible.len())]
    };
    let lead = rng.gen_range(width * 3 / 20..width * 17 / 20);
    let x0 = (target + w - lead) % w;
    let min_sky = (0..width).map(|x| pan.skyline[(x0 + x) % w]).min().unwrap_or(0);
    let y0 = min_sky
        .saturating_sub(rng.gen_range(height * 3 / 25..height * 8 / 25))
        .min(pan.height_px.saturating_sub(height));
    (x0, y0)
}

/// Moves the content around each centre by its own shift: output pixel
/// `p` nearest to centre `i` (within `radius`) reads the input at
/// `p − shift_i`, clamped to the image. Other pixels are unchanged.
pub fn warp_regions(img: &Raster, centres: &[(i64, i64)], shifts: &[(i64, i64)], radius: f64) -> Raster {
    let (w, h) = (img.width() as i64, img.height() as i64);
    Raster::from_fn(img.width(), img.height(), img.channels(), |x, y, ch| {
        let (xi, yi) = (x as i64, y as i64);
        let nearest = centres
            .iter()
            .zip(shifts)
            .map(|(c, s)| ((((c.0 - xi).pow(2) + (c.1 - yi).pow(2)) as f64).sqrt(), *s))
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let (sx, sy) = nearest.map_or((0, 0), |(_, s)| s);
        let sx = (xi - sx).clamp(0, w - 1) as usize;
        let sy = (yi - sy).clamp(0, h - 1) as usize;
        img.get(sx, sy, ch)
    })
}

/// Grey camera view of a panorama window: bright sky, terrain brightening
/// with distance (aerial perspective). Columns wrap around.
pub fn render_view(pan: &Panorama, x0: usize, y0: usize, width: usize, height: usize) -> Result<Raster> {
    if y0 + height > pan.height_px || width > pan.width_px {
        return Err(crate::error::invalid("view exceeds the panorama"));
    }
    Ok(Raster::from_fn(width, height, 1, |x, y, _| {
        let d = f64::from(pan.depth_at((x0 + x) % pan.width_px, y0 + y));
        if d.is_finite() {
            0.15 + 0.5 * (1.0 - (-d / 15_000.0).exp())
        } else {
            0.9
        }
    }))
}

/// Adds `fraction × (#edge pixels)` random spurious edges and Gaussian noise
/// of standard deviation `sigma` to strength and direction of edge pixels.
pub fn perturb_edges(edges: &EdgeMap, fraction: f64, sigma: f64, rng: &mut impl Rng) -> EdgeMap {
    let mut out = edges.clone();
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    for i in 0..out.strength.len() {
        if out.strength[i] > 0.0 {
            out.strength[i] = (out.strength[i] + noise.sample(rng)).clamp(0.0, 1.0);
            out.direction[i] = fold_direction(out.direction[i] + noise.sample(rng));
        }
    }
    let existing = edges.strength.iter().filter(|s| **s > 0.0).count();
    let extra = (fraction * existing as f64).round() as usize;
    for _ in 0..extra {
        let x = rng.gen_range(0..out.width);
        let y = rng.gen_range(0..out.height);
        out.set(x, y, rng.gen_range(0.2..1.0), rng.gen_range(0.0..std::f64::consts::PI));
    }
    out
}

/// Hides a contiguous `fraction` of the skyline behind a cloud: edges within
/// `±band` rows of the skyline are erased and replaced by the cloud's own
/// outline a few rows above.
pub fn occlude_skyline(edges: &EdgeMap, sky_rows: &[usize], fraction: f64, rng: &mut impl Rng) -> EdgeMap {
    let mut out = edges.clone();
    let w = edges.width;
    let span = ((fraction * w as f64).round() as usize).min(w);
    if span == 0 {
        return out;
    }
    let start = rng.gen_range(0..=w - span);
    let band = 12usize;
    let lift = rng.gen_range(6.0..16.0);
    let amp = rng.gen_range(2.0..6.0);
    let freq = rng.gen_range(0.05..0.15);
    let mut prev: Option<f64> = None;
    for x in start..start + span {
        let sky = sky_rows[x].min(edges.height.saturating_sub(1));
        for y in sky.saturating_sub(band)..(sky + band).min(edges.height) {
            let i = out.idx(x, y);
            out.strength[i] = 0.0;
        }
        let cloud = (sky as f64 - lift + amp * (freq * x as f64).sin()).max(0.0);
        let dir = prev.map_or(0.0, |p| (cloud - p).atan2(1.0));
        prev = Some(cloud);
        out.set(x, cloud.round() as usize, rng.gen_range(0.6..1.0), dir);
    }
    out
}

/// RGB image whose `snow` pixels are drawn around `snow_level` and the rest
/// around `ground_level`, per-channel Gaussian with standard deviation `sigma`.
pub fn two_cluster_image(
    snow: &[bool],
    width: usize,
    height: usize,
    snow_level: f64,
    ground_level: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Raster {
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let mut data = Vec::with_capacity(width * height * 3);
    for &is_snow in snow.iter().take(width * height) {
        let level = if is_snow { snow_level } else { ground_level };
        for _ in 0..3 {
            data.push((level + noise.sample(rng)).clamp(0.0, 1.0));
        }
    }
    Raster::new(width, height, 3, data).expect("consistent fixture")
}
