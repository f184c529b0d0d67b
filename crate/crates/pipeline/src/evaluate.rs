//! Evaluation against annotator ground truth: classifier ROC / TPR at a fixed
//! FPR for photos and webcams, and alignment success rates.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use snowcover_core::alignment::{Displacement, LocalPeak};
use snowcover_core::classify::{
    extract_features, train_logistic, ClassifierModel, GmmParams, LogisticHyper, LogisticModel, MountainMask,
    RgbndsiThreshold, SnowLabel, SnowMask, FEATURE_LEN, LOCAL_RADIUS_PX,
};
use snowcover_core::evaluation::{
    alignment_success, classification_scores, mean_local_error, roc, tpr_at_fpr, AlignmentOutcome,
};
use snowcover_core::imaging::{resize_nearest, Raster};
use snowcover_core::series::{interpolate_missing, spatiotemporal_median, MaskSeries};
use snowcover_core::webcam::compensate_shift;

use crate::config::JobConfig;
use crate::error::{PipelineError, Result};
use crate::imageio::{decode_mask_png, decode_rgb};
use crate::photo::{current_records, load_classified};
use crate::store::{GroundTruthAlignment, Store};
use crate::webcam::{days_between, webcam_source, DayRecord, WebcamSeries, WebcamSetup};

/// Training pixels kept per logistic fit.
const MAX_TRAINING_PIXELS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub classifier: String,
    /// `photo`, or for webcams `frames`, `dmi` or `dmi_median`.
    pub stage: String,
    pub images: usize,
    pub pixels: usize,
    pub auc: f64,
    pub fpr: f64,
    pub tpr_at_fpr: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    pub photos: usize,
    pub k: usize,
    pub theta_deg: f64,
    pub p_global: f64,
    pub p_refined: f64,
    /// Mean angular error of locally aligned peaks with a ground-truth pixel.
    pub mean_local_error_deg: Option<f64>,
    pub local_peaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebcamMetrics {
    pub webcam_id: String,
    pub days: usize,
    pub classifiers: Vec<ClassifierMetrics>,
}

/// `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub photos: Vec<ClassifierMetrics>,
    pub webcams: Vec<WebcamMetrics>,
    pub alignment: Option<AlignmentMetrics>,
    /// Why a part of the evaluation was skipped.
    pub notes: Vec<String>,
}

/// One image with its mountain area and ground truth; `group` keeps the
/// images of one photo or day together for leave-one-out training.
struct Sample {
    image: Raster,
    mountain: MountainMask,
    truth: SnowMask,
    group: usize,
}

/// The unsupervised classifiers with default parameters, the configured
/// one keeping its own parameters.
fn unsupervised(cfg: &JobConfig) -> Vec<ClassifierModel> {
    [
        ClassifierModel::FixedThreshold { threshold: 0.5 },
        ClassifierModel::SnowNosnow { base_bin: 127 },
        ClassifierModel::Rgbndsi {
            threshold: RgbndsiThreshold::default(),
        },
        ClassifierModel::Gmm(GmmParams::default()),
    ]
    .into_iter()
    .map(|m| {
        if m.name() == cfg.classifier.name() {
            cfg.classifier.clone()
        } else {
            m
        }
    })
    .collect()
}

/// Logistic model for evaluating `held_out`: the configured model when there
/// is one, otherwise trained on every other group.
struct LogisticSource<'a> {
    fixed: Option<LogisticModel>,
    samples: &'a [Sample],
    cache: BTreeMap<usize, Option<LogisticModel>>,
}

impl<'a> LogisticSource<'a> {
    fn new(cfg: &JobConfig, samples: &'a [Sample]) -> Self {
        let fixed = match &cfg.classifier {
            ClassifierModel::Logistic(m) => Some(m.clone()),
            _ => None,
        };
        Self {
            fixed,
            samples,
            cache: BTreeMap::new(),
        }
    }

    fn model(&mut self, held_out: usize) -> Result<Option<LogisticModel>> {
        if let Some(m) = &self.fixed {
            return Ok(Some(m.clone()));
        }
        if let Some(m) = self.cache.get(&held_out) {
            return Ok(m.clone());
        }
        let mut features: Vec<[f64; FEATURE_LEN]> = Vec::new();
        let mut labels = Vec::new();
        for s in self.samples.iter().filter(|s| s.group != held_out) {
            let f = extract_features(&s.image, &s.mountain, LOCAL_RADIUS_PX)?;
            let inside = (0..s.mountain.height)
                .flat_map(|y| (0..s.mountain.width).map(move |x| (x, y)))
                .filter(|&(x, y)| s.mountain.get(x, y));
            for (feat, (x, y)) in f.into_iter().zip(inside) {
                match s.truth.get(x, y) {
                    SnowLabel::Outside => {}
                    l => {
                        features.push(feat);
                        labels.push(l == SnowLabel::Snow);
                    }
                }
            }
        }
        let stride = features.len().div_ceil(MAX_TRAINING_PIXELS).max(1);
        let features: Vec<_> = features.into_iter().step_by(stride).collect();
        let labels: Vec<_> = labels.into_iter().step_by(stride).collect();
        let model = match train_logistic(&features, &labels, &LogisticHyper::default()) {
            Ok((m, _)) => Some(m),
            Err(e) => {
                warn!("logistic model without group {held_out}: {e}");
                None
            }
        };
        self.cache.insert(held_out, model.clone());
        Ok(model)
    }
}

/// Pooled scores and confusion counts of one classifier.
#[derive(Default)]
struct Tally {
    images: usize,
    scores: Vec<f64>,
    labels: Vec<bool>,
    counts: [usize; 4],
}

impl Tally {
    fn add(&mut self, scores: &[f64], pred: &SnowMask, truth: &SnowMask) -> Result<()> {
        if pred.labels.len() != truth.labels.len() || scores.len() != truth.labels.len() {
            return Err(PipelineError::Invalid(
                "prediction and ground truth differ in size".into(),
            ));
        }
        for (i, l) in truth.labels.iter().enumerate() {
            if *l != SnowLabel::Outside && pred.labels[i] != SnowLabel::Outside && scores[i].is_finite() {
                self.scores.push(scores[i]);
                self.labels.push(*l == SnowLabel::Snow);
            }
        }
        if let Ok(c) = classification_scores(pred, truth) {
            self.counts[0] += c.true_positive;
            self.counts[1] += c.false_positive;
            self.counts[2] += c.true_negative;
            self.counts[3] += c.false_negative;
        }
        self.images += 1;
        Ok(())
    }

    /// Binary masks scored as 1 (snow) / 0.
    fn add_binary(&mut self, pred: &SnowMask, truth: &SnowMask) -> Result<()> {
        let scores: Vec<f64> = pred
            .labels
            .iter()
            .map(|l| match l {
                SnowLabel::Snow => 1.0,
                SnowLabel::NoSnow => 0.0,
                SnowLabel::Outside => f64::NAN,
            })
            .collect();
        self.add(&scores, pred, truth)
    }

    fn finish(self, classifier: &str, stage: &str, fpr: f64, notes: &mut Vec<String>) -> Option<ClassifierMetrics> {
        let curve = match roc(&self.scores, &self.labels) {
            Ok(c) => c,
            Err(e) => {
                notes.push(format!("{classifier} ({stage}): {e}"));
                return None;
            }
        };
        let [tp, fp, tn, fnn] = self.counts;
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Some(ClassifierMetrics {
            classifier: classifier.to_string(),
            stage: stage.to_string(),
            images: self.images,
            pixels: self.scores.len(),
            tpr_at_fpr: tpr_at_fpr(&curve, fpr),
            auc: curve.auc,
            fpr,
            accuracy: ratio(tp + tn, tp + fp + tn + fnn).unwrap_or(0.0),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fnn),
        })
    }
}

fn fit_truth(truth: SnowMask, w: usize, h: usize) -> SnowMask {
    if truth.width == w && truth.height == h {
        return truth;
    }
    SnowMask {
        width: w,
        height: h,
        labels: resize_nearest(&truth.labels, truth.width, truth.height, w, h),
    }
}

fn evaluate_samples(
    cfg: &JobConfig,
    samples: &[Sample],
    stage: &str,
    notes: &mut Vec<String>,
) -> Result<Vec<ClassifierMetrics>> {
    let fpr = cfg.thresholds.fpr;
    let mut out = Vec::new();
    for model in unsupervised(cfg) {
        let mut tally = Tally::default();
        for s in samples {
            let c = model.classify(&s.image, &s.mountain)?;
            tally.add(&c.scores, &c.mask, &s.truth)?;
        }
        out.extend(tally.finish(model.name(), stage, fpr, notes));
    }
    let mut logistic = LogisticSource::new(cfg, samples);
    let mut tally = Tally::default();
    for s in samples {
        if let Some(m) = logistic.model(s.group)? {
            let c = ClassifierModel::Logistic(m).classify(&s.image, &s.mountain)?;
            tally.add(&c.scores, &c.mask, &s.truth)?;
        }
    }
    out.extend(tally.finish("logistic", stage, fpr, notes));
    Ok(out)
}

fn photo_samples(store: &Store) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (group, rec) in current_records(store)?.iter().enumerate() {
        let Some(gt) = store.read(&store.ground_truth_mask_path(&rec.id))? else {
            continue;
        };
        let Some((image, mask)) = load_classified(store, &rec.id)? else {
            warn!("{}: ground truth present but the photo was never classified", rec.id);
            continue;
        };
        let truth = fit_truth(decode_mask_png(&gt)?, image.width(), image.height());
        samples.push(Sample {
            mountain: mask.mountain(),
            image,
            truth,
            group,
        });
    }
    Ok(samples)
}

fn alignment_metrics(cfg: &JobConfig, store: &Store, notes: &mut Vec<String>) -> Result<Option<AlignmentMetrics>> {
    let mut outcomes = Vec::new();
    let mut local: Vec<LocalPeak> = Vec::new();
    let mut truth_px = Vec::new();
    let mut w_r = 0;
    for rec in current_records(store)? {
        let Some(gt) = store.read_json::<GroundTruthAlignment>(&store.ground_truth_alignment_path(&rec.id))? else {
            continue;
        };
        let Some(al) = rec.alignment else {
            notes.push(format!("{}: ground-truth alignment but no pipeline alignment", rec.id));
            continue;
        };
        outcomes.push(AlignmentOutcome {
            candidates: al.candidates.clone(),
            refined_rank: al.refined_rank,
            truth: Displacement::new(gt.dx, gt.dy),
            panorama_width: al.panorama_width,
        });
        w_r = al.panorama_width;
        for c in &gt.correspondences {
            if let Some(p) = al.peaks.iter().find(|p| p.name == c.peak) {
                local.push(p.clone());
                truth_px.push((c.photo_x, c.photo_y));
            }
        }
    }
    if outcomes.is_empty() {
        notes.push("alignment: no photo with ground truth".into());
        return Ok(None);
    }
    let (p_global, p_refined) = alignment_success(&outcomes, cfg.thresholds.success_deg, cfg.align.k)?;
    let mean_local_error_deg = if local.is_empty() {
        None
    } else {
        Some(mean_local_error(&local, &truth_px, w_r)?)
    };
    Ok(Some(AlignmentMetrics {
        photos: outcomes.len(),
        k: cfg.align.k,
        theta_deg: cfg.thresholds.success_deg,
        p_global,
        p_refined,
        mean_local_error_deg,
        local_peaks: local.len(),
    }))
}

fn webcam_ids(store: &Store) -> Result<Vec<String>> {
    let dir = store.root().join("webcams");
    let mut ids = Vec::new();
    if let Ok(entries) = std::fs::read_dir(&dir) {
        for e in entries.flatten() {
            if e.path().join("series.json").exists() {
                ids.push(e.file_name().to_string_lossy().into_owned());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn webcam_metrics(cfg: &JobConfig, store: &Store, id: &str, notes: &mut Vec<String>) -> Result<Option<WebcamMetrics>> {
    let Some(series) = store.read_json::<WebcamSeries>(&store.webcam_dir(id).join("series.json"))? else {
        return Ok(None);
    };
    let setup = WebcamSetup::load(&webcam_source(cfg, id)?)?;
    let dates = days_between(series.from, series.to);
    let truth: BTreeMap<NaiveDate, SnowMask> = dates
        .iter()
        .filter_map(|d| {
            store
                .read(&store.ground_truth_webcam_mask_path(id, *d))
                .transpose()
                .map(|b| (*d, b))
        })
        .map(|(d, b)| Ok((d, fit_truth(decode_mask_png(&b?)?, setup.width, setup.height))))
        .collect::<Result<_>>()?;
    if truth.is_empty() {
        notes.push(format!("webcam {id}: no ground-truth day"));
        return Ok(None);
    }
    let mut dmis: Vec<Option<Raster>> = Vec::with_capacity(dates.len());
    let mut frame_samples = Vec::new();
    let mut dmi_samples = Vec::new();
    let source = webcam_source(cfg, id)?;
    for (i, d) in dates.iter().enumerate() {
        let day_dir = store.webcam_day_dir(id, *d);
        let dmi = store
            .read(&day_dir.join("dmi.png"))?
            .map(|b| decode_rgb(&b))
            .transpose()?;
        if let (Some(t), Some(img)) = (truth.get(d), &dmi) {
            dmi_samples.push(Sample {
                image: img.clone(),
                mountain: setup.mountain.clone(),
                truth: t.clone(),
                group: i,
            });
            let record: Option<DayRecord> = store.read_json(&day_dir.join("day.json"))?;
            for f in record.iter().flat_map(|r| &r.frames) {
                let Some(shift) = f.shift else { continue };
                let path = source
                    .join(d.format("%Y-%m-%d").to_string())
                    .join(format!("{}.jpg", f.timestamp.format("%H%M%S")));
                match std::fs::read(&path) {
                    Ok(bytes) => frame_samples.push(Sample {
                        image: compensate_shift(&decode_rgb(&bytes)?, shift),
                        mountain: setup.mountain.clone(),
                        truth: t.clone(),
                        group: i,
                    }),
                    Err(e) => warn!("{}: {e}", path.display()),
                }
            }
        }
        dmis.push(dmi);
    }
    let mut classifiers = evaluate_samples(cfg, &frame_samples, "frames", notes)?;
    classifiers.extend(evaluate_samples(cfg, &dmi_samples, "dmi", notes)?);

    // DMI + spatio-temporal median: the whole series is classified, gap
    // filled and filtered, then compared on the ground-truth days.
    let fpr = cfg.thresholds.fpr;
    let median_for = |model: &ClassifierModel| -> Result<MaskSeries> {
        let masks = dmis
            .iter()
            .map(|d| {
                d.as_ref()
                    .map(|img| model.classify(img, &setup.mountain).map(|c| c.mask))
                    .transpose()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let filled = interpolate_missing(&MaskSeries::new(id, masks)?, cfg.webcam.interpolation)?;
        Ok(spatiotemporal_median(
            &filled,
            cfg.webcam.median_spatial,
            cfg.webcam.median_temporal,
        )?)
    };
    for model in unsupervised(cfg) {
        let filtered = median_for(&model)?;
        let mut tally = Tally::default();
        for (i, d) in dates.iter().enumerate() {
            if let (Some(t), Some(m)) = (truth.get(d), &filtered.masks[i]) {
                tally.add_binary(m, t)?;
            }
        }
        classifiers.extend(tally.finish(model.name(), "dmi_median", fpr, notes));
    }
    let mut logistic = LogisticSource::new(cfg, &dmi_samples);
    let mut tally = Tally::default();
    for (i, d) in dates.iter().enumerate() {
        let Some(t) = truth.get(d) else { continue };
        if let Some(model) = logistic.model(i)? {
            let filtered = median_for(&ClassifierModel::Logistic(model))?;
            if let Some(m) = &filtered.masks[i] {
                tally.add_binary(m, t)?;
            }
        }
    }
    classifiers.extend(tally.finish("logistic", "dmi_median", fpr, notes));
    Ok(Some(WebcamMetrics {
        webcam_id: id.to_string(),
        days: truth.len(),
        classifiers,
    }))
}

/// Evaluates everything that has ground truth and writes `metrics.json`
/// and `metrics.csv`.
pub fn evaluate(cfg: &JobConfig, store: &Store) -> Result<Metrics> {
    let mut notes = Vec::new();
    let samples = photo_samples(store)?;
    let photos = if samples.is_empty() {
        notes.push("photos: no ground-truth mask".into());
        Vec::new()
    } else {
        evaluate_samples(cfg, &samples, "photo", &mut notes)?
    };
    let alignment = alignment_metrics(cfg, store, &mut notes)?;
    let mut webcams = Vec::new();
    for id in webcam_ids(store)? {
        if cfg.webcam_dir.is_none() {
            notes.push(format!("webcam {id}: webcam_dir is not set"));
            continue;
        }
        webcams.extend(webcam_metrics(cfg, store, &id, &mut notes)?);
    }
    let metrics = Metrics {
        photos,
        webcams,
        alignment,
        notes,
    };
    store.write_json(&store.metrics_path(), &metrics)?;
    store.write(&store.root().join("metrics.csv"), &metrics_csv(&metrics)?)?;
    info!(
        "evaluated {} photo and {} webcam classifier runs",
        metrics.photos.len(),
        metrics.webcams.iter().map(|w| w.classifiers.len()).sum::<usize>()
    );
    Ok(metrics)
}

/// Flat table: one row per (source, classifier, stage).
pub fn metrics_csv(m: &Metrics) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "source",
        "classifier",
        "stage",
        "images",
        "pixels",
        "auc",
        "fpr",
        "tpr_at_fpr",
        "accuracy",
        "precision",
        "recall",
    ])?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    let rows = m.photos.iter().map(|c| ("photos".to_string(), c)).chain(
        m.webcams
            .iter()
            .flat_map(|wm| wm.classifiers.iter().map(|c| (format!("webcam:{}", wm.webcam_id), c))),
    );
    for (source, c) in rows {
        w.write_record([
            source,
            c.classifier.clone(),
            c.stage.clone(),
            c.images.to_string(),
            c.pixels.to_string(),
            format!("{:.6}", c.auc),
            format!("{:.3}", c.fpr),
            format!("{:.6}", c.tpr_at_fpr),
            format!("{:.6}", c.accuracy),
            opt(c.precision),
            opt(c.recall),
        ])?;
    }
    w.into_inner().map_err(|e| PipelineError::Invalid(e.to_string()))
}
