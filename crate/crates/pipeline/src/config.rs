use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use snowcover_core::alignment::AlignParams;
use snowcover_core::classify::{ClassifierModel, GmmParams};
use snowcover_core::dem::RenderOptions;
use snowcover_core::series::{InterpolationWeighting, DEFAULT_BANDS, DEFAULT_SNOW_FRACTION};
use snowcover_core::webcam::WebcamParams;

use crate::error::{IoContext, PipelineError, Result};

/// Job configuration, read from JSON. Relative paths are resolved against
/// the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    /// Directory of SRTM `.hgt` tiles.
    pub dem_dir: PathBuf,
    /// `name,lat,lon,elevation_m` peak list.
    pub peaks_csv: PathBuf,
    /// `make,model,sensor_width_mm` camera list.
    #[serde(default)]
    pub sensors_csv: Option<PathBuf>,
    #[serde(default)]
    pub photo_dir: Option<PathBuf>,
    /// Root of `<id>/<YYYY-MM-DD>/<HHMMSS>.jpg` webcam archives.
    #[serde(default)]
    pub webcam_dir: Option<PathBuf>,
    /// Output store.
    pub output_dir: PathBuf,
    /// Photo ids accepted by the relevance hook; all photos when absent.
    #[serde(default)]
    pub accept_list: Option<PathBuf>,
    #[serde(default = "default_classifier")]
    pub classifier: ClassifierModel,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub render: RenderOptions,
    #[serde(default)]
    pub align: AlignParams,
    #[serde(default)]
    pub webcam: WebcamSettings,
    /// Worker threads for photo and day processing (0 = one per core).
    #[serde(default)]
    pub workers: usize,
}

fn default_classifier() -> ClassifierModel {
    ClassifierModel::Gmm(GmmParams::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// `v̄`: minimum skyline visibility of a good-weather frame.
    pub min_visibility: f64,
    /// `s̄`: snow fraction a band needs to lie above the snow line.
    pub snow_fraction: f64,
    /// Number of altitude bands `N` for the SVI.
    pub bands: usize,
    /// Photos whose location lies lower are discarded.
    pub min_elevation_m: f64,
    /// Angular tolerance for alignment success, degrees.
    pub success_deg: f64,
    /// FPR at which the TPR is reported.
    pub fpr: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_visibility: 0.75,
            snow_fraction: DEFAULT_SNOW_FRACTION,
            bands: DEFAULT_BANDS,
            min_elevation_m: 600.0,
            success_deg: 0.3,
            fpr: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WebcamSettings {
    pub day_start: NaiveTime,
    pub day_end: NaiveTime,
    pub edge_threshold: f64,
    pub registration_window_px: usize,
    pub interpolation: InterpolationWeighting,
    /// Spatial and temporal half-widths of the median filter.
    pub median_spatial: usize,
    pub median_temporal: usize,
    /// Days in the snow-line smoothing window.
    pub smoothing_window: usize,
}

impl Default for WebcamSettings {
    fn default() -> Self {
        let p = WebcamParams::default();
        Self {
            day_start: p.day_start,
            day_end: p.day_end,
            edge_threshold: p.edge_threshold,
            registration_window_px: p.registration_window_px,
            interpolation: InterpolationWeighting::default(),
            median_spatial: 1,
            median_temporal: 1,
            smoothing_window: 4,
        }
    }
}

impl JobConfig {
    /// Minimal configuration with default parameters.
    pub fn new(dem_dir: impl Into<PathBuf>, peaks_csv: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            dem_dir: dem_dir.into(),
            peaks_csv: peaks_csv.into(),
            sensors_csv: None,
            photo_dir: None,
            webcam_dir: None,
            output_dir: output_dir.into(),
            accept_list: None,
            classifier: default_classifier(),
            thresholds: Thresholds::default(),
            render: RenderOptions::default(),
            align: AlignParams::default(),
            webcam: WebcamSettings::default(),
            workers: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut cfg: JobConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dem_dir);
        fix(&mut self.peaks_csv);
        fix(&mut self.output_dir);
        for p in [
            &mut self.sensors_csv,
            &mut self.photo_dir,
            &mut self.webcam_dir,
            &mut self.accept_list,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks that every referenced input exists and parameters are sane.
    pub fn validate(&self) -> Result<()> {
        let must_exist = [Some(&self.dem_dir), Some(&self.peaks_csv), self.sensors_csv.as_ref()]
            .into_iter()
            .chain([
                self.photo_dir.as_ref(),
                self.webcam_dir.as_ref(),
                self.accept_list.as_ref(),
            ])
            .flatten();
        for p in must_exist {
            if !p.exists() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.min_visibility) || !(0.0..=1.0).contains(&t.snow_fraction) {
            return Err(PipelineError::Config(
                "visibility and snow fraction must lie in [0, 1]".into(),
            ));
        }
        if t.bands < 2 {
            return Err(PipelineError::Config("at least 2 altitude bands are needed".into()));
        }
        if self.align.k == 0 {
            return Err(PipelineError::Config(
                "the number of candidates must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn webcam_params(&self) -> WebcamParams {
        WebcamParams {
            min_visibility: self.thresholds.min_visibility,
            edge_threshold: self.webcam.edge_threshold,
            registration_window_px: self.webcam.registration_window_px,
            day_start: self.webcam.day_start,
            day_end: self.webcam.day_end,
        }
    }

    /// Rayon pool honouring `workers`.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("job.json");
        std::fs::write(
            &path,
            r#"{"dem_dir": "dem", "peaks_csv": "peaks.csv", "output_dir": "/abs/store"}"#,
        )
        .unwrap();
        let cfg = JobConfig::load(&path).unwrap();
        assert_eq!(cfg.dem_dir, dir.path().join("dem"));
        assert_eq!(cfg.output_dir, PathBuf::from("/abs/store"));
        assert_eq!(cfg.thresholds.min_visibility, 0.75);
        assert_eq!(cfg.thresholds.min_elevation_m, 600.0);
        assert_eq!(cfg.align.k, 3);
        assert_eq!(cfg.classifier.name(), "gmm");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parameter_blocks_may_be_partial() {
        let cfg: JobConfig = serde_json::from_str(
            r#"{"dem_dir": "d", "peaks_csv": "p", "output_dir": "o",
                "classifier": {"kind": "gmm", "components": 3},
                "align": {"k": 5, "local": {"min_strength": 0.2}},
                "render": {"width_px": 1800}}"#,
        )
        .unwrap();
        let ClassifierModel::Gmm(gmm) = cfg.classifier else {
            panic!("expected gmm, got {}", cfg.classifier.name());
        };
        assert_eq!(gmm.components, 3);
        assert_eq!(gmm.posterior_threshold, 0.5);
        assert_eq!(cfg.align.k, 5);
        assert_eq!(cfg.align.local.min_strength, 0.2);
        assert_eq!(cfg.align.local.window_px, 20);
        assert_eq!(cfg.render.width_px, 1800);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<JobConfig>(
            r#"{"dem_dir": "d", "peaks_csv": "p", "output_dir": "o", "thresholds": {"bandz": 3}}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = JobConfig::new("dem", "peaks.csv", "store");
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<JobConfig>(&json).unwrap(), cfg);
    }
}
