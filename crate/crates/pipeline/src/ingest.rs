//! Photo ingestion: EXIF parsing, camera lookup and the elevation filter.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use snowcover_core::alignment::{CameraMeta, SensorDb};
use snowcover_core::dem::{DemGrid, GeoPoint};

use crate::error::{IoContext, Result};
use crate::exif::{read_exif, ExifInfo};
use crate::imageio::dimensions;
use crate::store::{validate_id, PhotoRecord, RejectReason, Relevance};

/// Decides which photos are relevant mountain views.
#[derive(Debug, Clone, PartialEq)]
pub enum RelevanceHook {
    AcceptAll,
    AcceptList(BTreeSet<String>),
}

impl RelevanceHook {
    /// One photo id per line; blank lines and `#` comments are skipped.
    pub fn from_list_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Ok(Self::AcceptList(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect(),
        ))
    }

    pub fn judge(&self, id: &str) -> bool {
        match self {
            RelevanceHook::AcceptAll => true,
            RelevanceHook::AcceptList(ids) => ids.contains(id),
        }
    }

    /// Resolves every `Unknown` record; other records are left as they are.
    pub fn apply(&self, records: &mut [PhotoRecord]) {
        for r in records.iter_mut().filter(|r| r.relevance == Relevance::Unknown) {
            r.relevance = if self.judge(&r.id) {
                Relevance::Accepted
            } else {
                Relevance::Rejected(RejectReason::NotRelevant)
            };
        }
    }
}

fn is_jpeg(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jpg") || e.eq_ignore_ascii_case("jpeg"))
}

/// JPEG files of a directory in name order.
pub fn list_jpegs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_file() && is_jpeg(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn photo_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let id: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    let id = id.trim_start_matches('.').to_string();
    if validate_id(&id).is_ok() {
        id
    } else {
        "photo".to_string()
    }
}

/// Builds one record per JPEG in `dir`. Photos pass with `Unknown`
/// relevance, or are rejected with a reason.
pub fn ingest_photos(dir: &Path, dem: &DemGrid, sensors: &SensorDb, min_elevation_m: f64) -> Result<Vec<PhotoRecord>> {
    let mut records: Vec<PhotoRecord> = Vec::new();
    for path in list_jpegs(dir)? {
        let mut id = photo_id(&path);
        if records.iter().any(|r| r.id == id) {
            let base = id.clone();
            let mut n = 2;
            while records.iter().any(|r| r.id == id) {
                id = format!("{base}-{n}");
                n += 1;
            }
        }
        let bytes = std::fs::read(&path).at(&path)?;
        records.push(ingest_one(id, path, &bytes, dem, sensors, min_elevation_m));
    }
    Ok(records)
}

fn rejected(id: String, path: PathBuf, reason: RejectReason) -> PhotoRecord {
    PhotoRecord {
        id,
        path,
        width: 0,
        height: 0,
        exif: ExifInfo::default(),
        meta: None,
        ground_elevation_m: None,
        relevance: Relevance::Rejected(reason),
        alignment: None,
        snow: None,
        flags: Vec::new(),
    }
}

pub fn ingest_one(
    id: String,
    path: PathBuf,
    bytes: &[u8],
    dem: &DemGrid,
    sensors: &SensorDb,
    min_elevation_m: f64,
) -> PhotoRecord {
    let (exif, (width, height)) = match (read_exif(bytes), dimensions(bytes)) {
        (Ok(e), Ok(d)) => (e, d),
        (e, d) => {
            warn!("{}: cannot decode ({:?} / {:?})", path.display(), e.err(), d.err());
            return rejected(id, path, RejectReason::Decode);
        }
    };
    let mut rec = rejected(id, path, RejectReason::Decode);
    rec.width = width;
    rec.height = height;
    rec.exif = exif.clone();

    let geo = match (exif.latitude, exif.longitude) {
        (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
        _ => None,
    };
    let Some(geo) = geo else {
        rec.relevance = Relevance::Rejected(RejectReason::NoGeotag);
        return rec;
    };
    let Some(focal) = exif.focal_length_mm else {
        rec.relevance = Relevance::Rejected(RejectReason::NoFocalLength);
        return rec;
    };
    rec.ground_elevation_m = dem.elevation_at(&geo).ok();
    let Some(elevation) = rec.ground_elevation_m.or(exif.altitude_m) else {
        rec.relevance = Relevance::Rejected(RejectReason::OutsideDem);
        return rec;
    };
    if elevation < min_elevation_m {
        debug!("{}: {elevation:.0} m is below {min_elevation_m:.0} m", rec.id);
        rec.relevance = Relevance::Rejected(RejectReason::LowElevation);
        return rec;
    }
    let (sensor_width_mm, low_confidence_fov) = sensors.lookup(
        exif.make.as_deref().unwrap_or_default(),
        exif.model.as_deref().unwrap_or_default(),
    );
    if low_confidence_fov {
        rec.flags.push("fallback_sensor_width".into());
    }
    rec.meta = Some(CameraMeta {
        focal_length_mm: focal,
        sensor_width_mm,
        geo: match exif.altitude_m {
            Some(a) => geo.with_elevation(a),
            None => geo,
        },
        capture_time: exif.capture_time,
        low_confidence_fov,
    });
    rec.relevance = Relevance::Unknown;
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exif::embed_exif;
    use crate::imageio::encode_jpeg;
    use snowcover_core::imaging::Raster;

    fn dem() -> DemGrid {
        // Rises from 0 m in the west to 4000 m in the east.
        let origin = GeoPoint::new(47.0, 9.0).unwrap();
        let n = 41;
        let samples = (0..n * n).map(|i| (i % n) as f32 * 100.0).collect();
        DemGrid::from_samples(origin, 3.0, n, n, samples).unwrap()
    }

    fn photo(info: &ExifInfo) -> Vec<u8> {
        embed_exif(&encode_jpeg(&Raster::filled(16, 12, 3, 0.4)).unwrap(), info).unwrap()
    }

    fn at(lon_frac: f64) -> ExifInfo {
        ExifInfo {
            make: Some("Acme".into()),
            model: Some("Peak 1".into()),
            focal_length_mm: Some(24.0),
            latitude: Some(46.995),
            longitude: Some(9.0 + lon_frac * 40.0 * 3.0 / 3600.0),
            altitude_m: None,
            capture_time: None,
        }
    }

    #[test]
    fn rejection_reasons() {
        let dem = dem();
        let sensors = SensorDb::from_csv("make,model,sensor_width_mm\nAcme,Peak 1,23.5\n".as_bytes()).unwrap();
        let run = |bytes: &[u8]| ingest_one("p".into(), "p.jpg".into(), bytes, &dem, &sensors, 600.0);

        let high = run(&photo(&at(0.5)));
        assert_eq!(high.relevance, Relevance::Unknown);
        assert_eq!(high.meta.as_ref().unwrap().sensor_width_mm, 23.5);
        assert!((high.ground_elevation_m.unwrap() - 2000.0).abs() < 1.0);
        assert_eq!((high.width, high.height), (16, 12));

        assert_eq!(
            run(&photo(&at(0.1))).relevance,
            Relevance::Rejected(RejectReason::LowElevation)
        );
        let no_gps = ExifInfo {
            latitude: None,
            ..at(0.5)
        };
        assert_eq!(
            run(&photo(&no_gps)).relevance,
            Relevance::Rejected(RejectReason::NoGeotag)
        );
        let no_focal = ExifInfo {
            focal_length_mm: None,
            ..at(0.5)
        };
        assert_eq!(
            run(&photo(&no_focal)).relevance,
            Relevance::Rejected(RejectReason::NoFocalLength)
        );
        let far = ExifInfo {
            latitude: Some(10.0),
            ..at(0.5)
        };
        assert_eq!(
            run(&photo(&far)).relevance,
            Relevance::Rejected(RejectReason::OutsideDem)
        );
        assert_eq!(
            run(b"\xFF\xD8garbage").relevance,
            Relevance::Rejected(RejectReason::Decode)
        );

        let unknown_cam = ExifInfo {
            model: Some("Other".into()),
            ..at(0.5)
        };
        let r = run(&photo(&unknown_cam));
        assert!(r.meta.unwrap().low_confidence_fov);
        assert!(r.flags.contains(&"fallback_sensor_width".to_string()));
    }

    #[test]
    fn hook_resolves_unknown_only() {
        let dem = dem();
        let sensors = SensorDb::default();
        let mut recs = vec![
            ingest_one("a".into(), "a.jpg".into(), &photo(&at(0.5)), &dem, &sensors, 600.0),
            ingest_one("b".into(), "b.jpg".into(), &photo(&at(0.5)), &dem, &sensors, 600.0),
            ingest_one("c".into(), "c.jpg".into(), &photo(&at(0.1)), &dem, &sensors, 600.0),
        ];
        RelevanceHook::AcceptList(["a".to_string(), "c".to_string()].into()).apply(&mut recs);
        assert_eq!(recs[0].relevance, Relevance::Accepted);
        assert_eq!(recs[1].relevance, Relevance::Rejected(RejectReason::NotRelevant));
        assert_eq!(recs[2].relevance, Relevance::Rejected(RejectReason::LowElevation));
    }

    #[test]
    fn ids_from_file_names() {
        assert_eq!(photo_id(Path::new("/x/IMG 0001.JPG")), "IMG_0001");
        assert_eq!(photo_id(Path::new("/x/..jpg")), "photo");
    }
}
