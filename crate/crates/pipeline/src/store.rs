//! On-disk store.
//!
//! ```text
//! <root>/photos/index.json                 all photo records
//! <root>/photos/<id>/panorama.json|.png    rendered panorama (peaks, edges)
//! <root>/photos/<id>/classified.png        image the classifier saw
//! <root>/photos/<id>/mask.png              snow mask (255 / 0 / 128)
//! <root>/photos/<id>/scores.json           per-pixel classifier scores
//! <root>/webcams/<id>/<date>/day.json      weather filter and registration
//! <root>/webcams/<id>/<date>/dmi.png       daily median image
//! <root>/webcams/<id>/<date>/mask.png      classified DMI
//! <root>/webcams/<id>/<date>/filtered.png  mask after gap filling and median
//! <root>/webcams/<id>/series.json|.csv     SVI and snow-line series
//! <root>/ground_truth/...                  annotator uploads, never written by runs
//! <root>/metrics.json                      last evaluation
//! ```
//!
//! Every file is written to a temporary name and renamed into place, so an
//! interrupted run never leaves a truncated output behind.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use snowcover_core::alignment::{AlignmentResult, CameraMeta};
use snowcover_core::series::SviRecord;

use crate::error::{IoContext, PipelineError, Result};
use crate::exif::ExifInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Decode,
    NoGeotag,
    NoFocalLength,
    LowElevation,
    OutsideDem,
    NotRelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Relevance {
    Accepted,
    Rejected(RejectReason),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowSummary {
    pub classifier: String,
    pub width: usize,
    pub height: usize,
    pub snow_fraction: f64,
    pub svi: Option<SviRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoRecord {
    pub id: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub exif: ExifInfo,
    pub meta: Option<CameraMeta>,
    /// DEM elevation at the geotag, when inside the DEM.
    pub ground_elevation_m: Option<f64>,
    pub relevance: Relevance,
    pub alignment: Option<AlignmentResult>,
    pub snow: Option<SnowSummary>,
    /// Problems met while processing (the record stays in the index).
    #[serde(default)]
    pub flags: Vec<String>,
}

impl PhotoRecord {
    pub fn is_accepted(&self) -> bool {
        self.relevance == Relevance::Accepted
    }
}

/// Ground-truth alignment posted by the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthAlignment {
    pub dx: i64,
    pub dy: i64,
    #[serde(default)]
    pub correspondences: Vec<PeakCorrespondence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakCorrespondence {
    pub peak: String,
    /// Photo pixel at panorama scale.
    pub photo_x: f64,
    pub photo_y: f64,
}

/// Identifiers become path components, so they are restricted to a safe alphabet.
pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(PipelineError::Invalid(format!("invalid identifier {id:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).at(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn photo_dir(&self, id: &str) -> PathBuf {
        self.root.join("photos").join(id)
    }

    pub fn photo_index_path(&self) -> PathBuf {
        self.root.join("photos").join("index.json")
    }

    pub fn webcam_dir(&self, id: &str) -> PathBuf {
        self.root.join("webcams").join(id)
    }

    pub fn webcam_day_dir(&self, id: &str, date: NaiveDate) -> PathBuf {
        self.webcam_dir(id).join(date.format("%Y-%m-%d").to_string())
    }

    pub fn ground_truth_alignment_path(&self, id: &str) -> PathBuf {
        self.root
            .join("ground_truth")
            .join("alignments")
            .join(format!("{id}.json"))
    }

    pub fn ground_truth_mask_path(&self, id: &str) -> PathBuf {
        self.root.join("ground_truth").join("masks").join(format!("{id}.png"))
    }

    /// Ground truth for one webcam day, placed by hand.
    pub fn ground_truth_webcam_mask_path(&self, id: &str, date: NaiveDate) -> PathBuf {
        self.root
            .join("ground_truth")
            .join("webcams")
            .join(id)
            .join(format!("{}.png", date.format("%Y-%m-%d")))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.json")
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn read(&self, path: &Path) -> Result<Option<Vec<u8>>> {
        match std::fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(PipelineError::Io {
                path: path.to_path_buf(),
                source: e,
            }),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>> {
        self.read(path)?
            .map(|b| serde_json::from_slice(&b).map_err(PipelineError::from))
            .transpose()
    }

    pub fn load_photos(&self) -> Result<Vec<PhotoRecord>> {
        Ok(self.read_json(&self.photo_index_path())?.unwrap_or_default())
    }

    pub fn save_photos(&self, records: &[PhotoRecord]) -> Result<()> {
        self.write_json(&self.photo_index_path(), records)
    }

    pub fn photo(&self, id: &str) -> Result<PhotoRecord> {
        self.load_photos()?
            .into_iter()
            .find(|r| r.id == id)
            .ok_or_else(|| PipelineError::NotFound(format!("photo {id}")))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).at(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| PipelineError::Invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.partial", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).at(&tmp)?;
    std::fs::rename(&tmp, path).at(path)?;
    Ok(())
}
