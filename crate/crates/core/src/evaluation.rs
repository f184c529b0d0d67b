//! Metrics: ROC curves, alignment success rates, local alignment error and
//! mask agreement scores.

use serde::{Deserialize, Serialize};

use crate::alignment::{displacement_distance, peak_error, CandidateSet, Displacement, LocalPeak};
use crate::classify::{SnowLabel, SnowMask};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from the strictest threshold down to accepting everything.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps every distinct score as a threshold (positive iff `score >= t`).
/// Equal scores enter the curve together as one step.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(invalid(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("NaN score"));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(invalid("ROC needs both positive and negative samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// TPR at `fpr_target`, linearly interpolated between the last sweep point
/// with `fpr <= target` and the next one.
pub fn tpr_at_fpr(curve: &RocCurve, fpr_target: f64) -> f64 {
    let p = &curve.points;
    let Some(i) = p.iter().rposition(|q| q.0 <= fpr_target) else {
        return 0.0;
    };
    match p.get(i + 1) {
        None => p[i].1,
        Some(next) => {
            let t = (fpr_target - p[i].0) / (next.0 - p[i].0);
            p[i].1 + t * (next.1 - p[i].1)
        }
    }
}

/// One aligned photo with known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub candidates: CandidateSet,
    /// Zero-based rank of the refined choice among `candidates`.
    pub refined_rank: usize,
    pub truth: Displacement,
    pub panorama_width: usize,
}

/// `(p_G, p_R)`: fraction of photos with at least one of the top `k`
/// candidates, respectively the refined choice, within `theta_deg` of the
/// ground truth. The refined choice must come from the top `k`.
pub fn alignment_success(outcomes: &[AlignmentOutcome], theta_deg: f64, k: usize) -> Result<(f64, f64)> {
    if outcomes.is_empty() {
        return Err(Error::Empty("no alignment outcomes".into()));
    }
    let (mut hit_g, mut hit_r) = (0usize, 0usize);
    for o in outcomes {
        if o.refined_rank >= k.min(o.candidates.len()) {
            return Err(invalid(format!(
                "refined rank {} is outside the top {k} of {} candidates",
                o.refined_rank,
                o.candidates.len()
            )));
        }
        let within = |d: Displacement| {
            displacement_distance(d, o.truth, o.panorama_width) * 360.0 / o.panorama_width as f64 <= theta_deg
        };
        if o.candidates.displacements().take(k).any(within) {
            hit_g += 1;
        }
        if within(o.candidates.candidates[o.refined_rank].displacement) {
            hit_r += 1;
        }
    }
    assert!(hit_r <= hit_g, "refined success cannot exceed candidate success");
    let n = outcomes.len() as f64;
    Ok((hit_g as f64 / n, hit_r as f64 / n))
}

/// `ε^L`: mean angular error of each locally aligned peak against its
/// ground-truth photo pixel.
pub fn mean_local_error(peaks: &[LocalPeak], truth_photo_px: &[(f64, f64)], w_r: usize) -> Result<f64> {
    if peaks.is_empty() {
        return Err(Error::Empty("no locally aligned peaks".into()));
    }
    if peaks.len() != truth_photo_px.len() {
        return Err(invalid(format!(
            "{} peaks vs {} ground-truth pixels",
            peaks.len(),
            truth_photo_px.len()
        )));
    }
    let sum: f64 = peaks
        .iter()
        .zip(truth_photo_px)
        .map(|(p, t)| peak_error((p.pan_x as f64, p.pan_y as f64), *t, p.displacement, w_r))
        .sum();
    Ok(sum / peaks.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// `None` when nothing was predicted as snow.
    pub precision: Option<f64>,
    /// `None` when the truth has no snow.
    pub recall: Option<f64>,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

/// Confusion counts over pixels that are inside the mountain area in both masks.
pub fn classification_scores(pred: &SnowMask, truth: &SnowMask) -> Result<ClassificationScores> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {}x{}, truth {}x{}",
            pred.width, pred.height, truth.width, truth.height
        )));
    }
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (p, t) in pred.labels.iter().zip(&truth.labels) {
        match (p, t) {
            (SnowLabel::Snow, SnowLabel::Snow) => tp += 1,
            (SnowLabel::Snow, SnowLabel::NoSnow) => fp += 1,
            (SnowLabel::NoSnow, SnowLabel::NoSnow) => tn += 1,
            (SnowLabel::NoSnow, SnowLabel::Snow) => fnn += 1,
            _ => {}
        }
    }
    let total = tp + fp + tn + fnn;
    if total == 0 {
        return Err(Error::Empty("no common mountain pixels".into()));
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(ClassificationScores {
        accuracy: (tp + tn) as f64 / total as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fnn),
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fnn,
    })
}
