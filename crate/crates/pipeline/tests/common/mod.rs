//! Synthetic worlds for pipeline tests: an SRTM tile, geotagged photos cut
//! from its panorama, and fixed webcams with a known snow line.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snowcover::exif::{embed_exif, read_exif, ExifInfo};
use snowcover::imageio::encode_jpeg;
use snowcover::photo::Inputs;
use snowcover::webcam::AltitudeMap;
use snowcover::JobConfig;
use snowcover_core::classify::{SnowLabel, SnowMask};
use snowcover_core::dem::{encode_tile, render_panorama, GeoPoint, Panorama, SRTM3_SIDE};
use snowcover_core::imaging::Raster;
use snowcover_core::synthetic::{fixture_render_options, procedural_terrain, TerrainParams};

pub const SKY: [f64; 3] = [0.25, 0.45, 0.85];
pub const SNOW: [f64; 3] = [0.94, 0.95, 0.97];
pub const ROCK: [f64; 3] = [0.20, 0.17, 0.14];

/// Altitude over which painted snow fades into rock, centred on the snow line.
pub const SNOW_FADE_M: f32 = 80.0;

/// Sensor width of the fixture camera (full frame).
pub const SENSOR_MM: f64 = 36.0;

pub fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap().flatten() {
        let target = to.join(e.file_name());
        if e.path().is_dir() {
            copy_tree(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn base_config(dir: &Path) -> JobConfig {
    let mut cfg = JobConfig::new(dir.join("dem"), dir.join("peaks.csv"), dir.join("store"));
    cfg.sensors_csv = Some(dir.join("sensors.csv"));
    cfg.photo_dir = Some(dir.join("photos"));
    cfg.webcam_dir = Some(dir.join("webcams"));
    cfg.render = fixture_render_options();
    cfg.workers = 2;
    for d in ["dem", "photos", "webcams"] {
        std::fs::create_dir_all(dir.join(d)).unwrap();
    }
    std::fs::write(dir.join("peaks.csv"), "name,lat,lon,elevation_m\n").unwrap();
    std::fs::write(
        dir.join("sensors.csv"),
        format!("make,model,sensor_width_mm\nFixture,Camera,{SENSOR_MM}\n"),
    )
    .unwrap();
    cfg
}

/// A procedural mountain range written as SRTM tile N46E009, with the
/// panorama the pipeline will render at the photo location.
pub struct World {
    pub cfg: JobConfig,
    /// Photo location as it reads back from EXIF.
    pub geo: GeoPoint,
    pub pan: Panorama,
}

impl World {
    pub fn build(dir: &Path, seed: u64) -> World {
        let cfg = base_config(dir);
        let params = TerrainParams {
            size: SRTM3_SIDE,
            origin_lat: 47.0,
            origin_lon: 9.0,
            ..TerrainParams::default()
        };
        let t = procedural_terrain(seed, &params).unwrap();
        let samples: Vec<i16> = t.dem.samples().iter().map(|v| v.round() as i16).collect();
        std::fs::write(dir.join("dem").join("N46E009.hgt"), encode_tile(&samples)).unwrap();
        let mut peaks = String::from("name,lat,lon,elevation_m\n");
        for p in &t.peaks {
            peaks.push_str(&format!(
                "{},{},{},{}\n",
                p.name, p.position.lat, p.position.lon, p.elevation_m
            ));
        }
        std::fs::write(dir.join("peaks.csv"), peaks).unwrap();

        let info = exif_at(t.observer.lat, t.observer.lon, 40.0);
        let back =
            read_exif(&embed_exif(&encode_jpeg(&Raster::filled(8, 8, 3, 0.5)).unwrap(), &info).unwrap()).unwrap();
        let geo = GeoPoint::new(back.latitude.unwrap(), back.longitude.unwrap()).unwrap();
        let inputs = Inputs::load(&cfg).unwrap();
        let pan = render_panorama(&inputs.dem, &geo, &inputs.peaks, &cfg.render).unwrap();
        World { cfg, geo, pan }
    }
}

/// Fixture camera EXIF for a horizontal field of view of `fov_deg`.
pub fn exif_at(lat: f64, lon: f64, fov_deg: f64) -> ExifInfo {
    let focal = SENSOR_MM / 2.0 / (fov_deg / 2.0).to_radians().tan();
    ExifInfo {
        make: Some("Fixture".into()),
        model: Some("Camera".into()),
        focal_length_mm: Some((focal * 100.0).round() / 100.0),
        latitude: Some(lat),
        longitude: Some(lon),
        altitude_m: None,
        capture_time: None,
    }
}

/// Panorama pixel that photo pixel `(x, y)` of a `w × h` photo shows, for a
/// view of `pw × ph` panorama pixels at `(x0, y0)`.
fn pan_pixel(
    pan: &Panorama,
    view: (usize, usize, usize, usize),
    w: usize,
    h: usize,
    x: usize,
    y: usize,
) -> (usize, usize) {
    let (x0, y0, pw, ph) = view;
    let sx = (((x as f64 + 0.5) * pw as f64 / w as f64) as usize).min(pw - 1);
    let sy = (((y as f64 + 0.5) * ph as f64 / h as f64) as usize).min(ph - 1);
    ((x0 + sx) % pan.width_px, y0 + sy)
}

/// Colour photo of a panorama window: sky, and terrain that is snow above
/// `snow_alt` and rock below, darker with distance. Snow thins out over
/// [`SNOW_FADE_M`] so the skyline stays the strongest edge.
pub fn paint_view(pan: &Panorama, view: (usize, usize, usize, usize), w: usize, h: usize, snow_alt: f32) -> Raster {
    Raster::from_fn(w, h, 3, |x, y, c| {
        let (px, py) = pan_pixel(pan, view, w, h, x, y);
        let d = pan.depth_at(px, py);
        if !d.is_finite() {
            return SKY[c];
        }
        let shade = 1.0 - 0.25 * (-(f64::from(d)) / 8_000.0).exp();
        let t = f64::from(((pan.altitude_at(px, py) - snow_alt) / SNOW_FADE_M + 0.5).clamp(0.0, 1.0));
        (SNOW[c] * t + ROCK[c] * (1.0 - t)) * shade
    })
}

/// Ground truth of [`paint_view`] with the mountain area M = below the
/// panorama skyline and on terrain, plus per-pixel altitudes.
pub fn known_mask(
    pan: &Panorama,
    view: (usize, usize, usize, usize),
    w: usize,
    h: usize,
    snow_alt: f32,
) -> (SnowMask, Vec<f32>) {
    let mut labels = Vec::with_capacity(w * h);
    let mut alt = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = pan_pixel(pan, view, w, h, x, y);
            let a = pan.altitude_at(px, py);
            alt.push(a);
            labels.push(if a.is_nan() || py < pan.skyline[px] {
                SnowLabel::Outside
            } else if a >= snow_alt {
                SnowLabel::Snow
            } else {
                SnowLabel::NoSnow
            });
        }
    }
    (
        SnowMask {
            width: w,
            height: h,
            labels,
        },
        alt,
    )
}

pub fn write_photo(path: &Path, img: &Raster, info: &ExifInfo) {
    std::fs::write(path, embed_exif(&encode_jpeg(img).unwrap(), info).unwrap()).unwrap();
}

/// A fixed webcam looking at a ridge whose altitude falls steadily with the row.
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub skyline: Vec<usize>,
    pub altitude: Vec<Option<f32>>,
}

impl Scene {
    /// 3400 m at row 0, 20 m lower per row.
    pub fn ridge(width: usize, height: usize) -> Scene {
        Scene::with_gradient(width, height, 3400.0, 20.0)
    }

    pub fn with_gradient(width: usize, height: usize, top_m: f32, m_per_row: f32) -> Scene {
        let skyline: Vec<usize> = (0..width)
            .map(|x| {
                let x = x as f64;
                (height as f64 * 0.25 + 9.0 * (x / 17.0).sin() + 5.0 * (x / 6.5).cos()).round() as usize
            })
            .collect();
        let foreground = height - height / 12;
        let altitude = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| {
                (y >= skyline[x] && y < foreground)
                    .then(|| top_m - m_per_row * y as f32 + 15.0 * ((x as f32) / 11.0).sin())
            })
            .collect();
        Scene {
            width,
            height,
            skyline,
            altitude,
        }
    }

    pub fn alt(&self, x: usize, y: usize) -> Option<f32> {
        self.altitude[y * self.width + x]
    }

    /// Range of altitudes inside the mountain area.
    pub fn altitude_range(&self) -> (f32, f32) {
        let v = self.altitude.iter().flatten();
        (
            v.clone().copied().fold(f32::MAX, f32::min),
            v.copied().fold(f32::MIN, f32::max),
        )
    }

    /// Frame with the scene moved by `shift` and, if `cloud > 0`, a cloud
    /// bank hiding that fraction of the skyline.
    pub fn frame(&self, snow_alt: f32, shift: (i64, i64), cloud: f64, rng: &mut ChaCha8Rng) -> Raster {
        let (w, h) = (self.width as i64, self.height as i64);
        let c0 = rng.gen_range(0..self.width) as i64;
        let cw = (cloud * self.width as f64).round() as i64;
        let cloud_bottom = *self.skyline.iter().max().unwrap() as i64 + 12;
        let noise: Vec<f64> = (0..self.width * self.height)
            .map(|_| rng.gen_range(-0.02..0.02))
            .collect();
        Raster::from_fn(self.width, self.height, 3, |x, y, c| {
            let (xi, yi) = (x as i64, y as i64);
            if cw > 0 && (xi - c0).rem_euclid(w) < cw && yi <= cloud_bottom {
                return 0.8;
            }
            let sx = (xi - shift.0).clamp(0, w - 1) as usize;
            let sy = (yi - shift.1).clamp(0, h - 1) as usize;
            let base = if sy < self.skyline[sx] {
                SKY
            } else {
                match self.alt(sx, sy) {
                    Some(a) if a >= snow_alt => SNOW,
                    _ => ROCK,
                }
            };
            (base[c] + noise[sy * self.width + sx]).clamp(0.0, 1.0)
        })
    }

    pub fn truth(&self, snow_alt: f32) -> SnowMask {
        SnowMask {
            width: self.width,
            height: self.height,
            labels: (0..self.height)
                .flat_map(|y| (0..self.width).map(move |x| (x, y)))
                .map(|(x, y)| match self.alt(x, y) {
                    Some(a) if y >= self.skyline[x] => {
                        if a >= snow_alt {
                            SnowLabel::Snow
                        } else {
                            SnowLabel::NoSnow
                        }
                    }
                    _ => SnowLabel::Outside,
                })
                .collect(),
        }
    }

    /// Writes the reference skyline, altitude map and, per day, `frames`
    /// JPEG frames from 09:00 every 30 minutes. `cloud[d]` is the cloud cover
    /// of every frame of day `d`.
    pub fn write_archive(
        &self,
        dir: &Path,
        start: NaiveDate,
        snow_alt: &[f32],
        cloud: &[f64],
        frames: usize,
        seed: u64,
    ) {
        std::fs::create_dir_all(dir).unwrap();
        std::fs::write(
            dir.join("reference_skyline.json"),
            serde_json::to_vec(&self.skyline).unwrap(),
        )
        .unwrap();
        let alt = AltitudeMap {
            width: self.width,
            height: self.height,
            values: self.altitude.clone(),
        };
        std::fs::write(dir.join("altitude.json"), serde_json::to_vec(&alt).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (d, (s, c)) in snow_alt.iter().zip(cloud).enumerate() {
            let date = start + chrono::Days::new(d as u64);
            let day_dir = dir.join(date.format("%Y-%m-%d").to_string());
            std::fs::create_dir_all(&day_dir).unwrap();
            for f in 0..frames {
                let t = NaiveTime::from_hms_opt(9, 0, 0).unwrap() + chrono::Duration::minutes(30 * f as i64);
                let shift = (rng.gen_range(-2..=2), rng.gen_range(-2..=2));
                let img = self.frame(*s, shift, *c, &mut rng);
                std::fs::write(
                    day_dir.join(format!("{}.jpg", t.format("%H%M%S"))),
                    encode_jpeg(&img).unwrap(),
                )
                .unwrap();
            }
        }
    }
}
