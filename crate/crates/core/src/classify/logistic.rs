use serde::{Deserialize, Serialize};

use super::{Classification, MountainMask, FEATURE_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticHyper {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self { l2: 1e-4, epochs: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Snow iff the predicted probability reaches this.
    pub threshold: f64,
}

impl LogisticModel {
    pub fn probability(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} features for a model with {} weights",
                features.len(),
                self.weights.len()
            )));
        }
        Ok(sigmoid(dot(&self.weights, features) + self.bias))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean cross-entropy plus `l2/2·‖w‖²`, with its gradient `(∂w, ∂b)`.
pub fn logistic_loss_grad<F: AsRef<[f64]>>(
    weights: &[f64],
    bias: f64,
    features: &[F],
    labels: &[bool],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (f, &y) in features.iter().zip(labels) {
        let f = f.as_ref();
        let z = dot(weights, f) + bias;
        let t = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, x) in gw.iter_mut().zip(f) {
            *g += r * x;
        }
        gb += r;
    }
    loss = loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss, gw, gb / n)
}

/// Full-batch gradient descent from zero with step `1/L`, where `L` bounds
/// the loss curvature. Returns the model and the loss before every epoch.
pub fn train_logistic<F: AsRef<[f64]>>(
    features: &[F],
    labels: &[bool],
    hyper: &LogisticHyper,
) -> Result<(LogisticModel, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch("features and labels differ in length".into()));
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidArgument("training data must contain both classes".into()));
    }
    let dim = features[0].as_ref().len();
    if features.iter().any(|f| f.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch("feature vectors differ in length".into()));
    }
    let max_norm2 = features
        .iter()
        .map(|f| f.as_ref().iter().map(|x| x * x).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    let step = 1.0 / (0.25 * max_norm2 + hyper.l2);

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        let (loss, gw, gb) = logistic_loss_grad(&w, b, features, labels, hyper.l2);
        losses.push(loss);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= step * g;
        }
        b -= step * gb;
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::Degenerate("logistic weights diverged".into()));
    }
    Ok((
        LogisticModel {
            weights: w,
            bias: b,
            threshold: 0.5,
        },
        losses,
    ))
}

/// Applies a 33-feature model; `features` holds one vector per mountain pixel
/// in row-major order, as produced by `extract_features`.
pub fn classify_logistic<F: AsRef<[f64]>>(
    model: &LogisticModel,
    mountain: &MountainMask,
    features: &[F],
    threshold: f64,
) -> Result<Classification> {
    if model.weights.len() != FEATURE_LEN {
        return Err(Error::DimensionMismatch(format!(
            "model has {} weights, expected {FEATURE_LEN}",
            model.weights.len()
        )));
    }
    if features.len() != mountain.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature vectors for {} mountain pixels",
            features.len(),
            mountain.count()
        )));
    }
    let mut scores = vec![f64::NAN; mountain.width * mountain.height];
    let mut it = features.iter();
    for (i, inside) in mountain.bits.iter().enumerate() {
        if *inside {
            let f = it.next().expect("counted above");
            scores[i] = model.probability(f.as_ref())?;
        }
    }
    Ok(Classification::from_scores(mountain, scores, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::SnowLabel;
    use crate::imaging::BitMask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let dim = rng.gen_range(1..6);
            let n = rng.gen_range(3..20);
            let feats: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let (_, gw, gb) = logistic_loss_grad(&w, b, &feats, &labels, 0.01);
            let h = 1e-6;
            for j in 0..dim {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let fd = (logistic_loss_grad(&wp, b, &feats, &labels, 0.01).0
                    - logistic_loss_grad(&wm, b, &feats, &labels, 0.01).0)
                    / (2.0 * h);
                assert!((fd - gw[j]).abs() <= 1e-5);
            }
            let fd = (logistic_loss_grad(&w, b + h, &feats, &labels, 0.01).0
                - logistic_loss_grad(&w, b - h, &feats, &labels, 0.01).0)
                / (2.0 * h);
            assert!((fd - gb).abs() <= 1e-5);
        }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let feats: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![0.2, 0.1], vec![0.9, 0.8], vec![0.8, 0.9]];
        let labels = vec![false, false, true, true];
        let (m, losses) = train_logistic(&feats, &labels, &LogisticHyper::default()).unwrap();
        for (f, l) in feats.iter().zip(&labels) {
            assert_eq!(m.probability(f).unwrap() >= 0.5, *l);
        }
        assert!(losses.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        let double: Vec<Vec<f64>> = feats.iter().chain(&feats).cloned().collect();
        let dl: Vec<bool> = labels.iter().chain(&labels).copied().collect();
        assert_eq!(train_logistic(&double, &dl, &LogisticHyper::default()).unwrap().0, m);
    }

    #[test]
    fn single_class_rejected() {
        assert!(train_logistic(&[vec![0.1], vec![0.2]], &[true, true], &LogisticHyper::default()).is_err());
    }

    #[test]
    fn zero_model_gives_snow_and_checks_length() {
        let m = LogisticModel {
            weights: vec![0.0; FEATURE_LEN],
            bias: 0.0,
            threshold: 0.5,
        };
        let mask = BitMask::new(2, 1, true);
        let c = classify_logistic(&m, &mask, &[[0.3; FEATURE_LEN], [0.7; FEATURE_LEN]], 0.5).unwrap();
        assert!(c.mask.labels.iter().all(|l| *l == SnowLabel::Snow));
        assert!(classify_logistic(&m, &mask, &[vec![0.1; 32], vec![0.1; 32]], 0.5).is_err());
    }

    #[test]
    fn probability_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = LogisticModel {
            weights: (0..FEATURE_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: 0.3,
            threshold: 0.5,
        };
        let f: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.gen()).collect();
        let z: f64 = m.weights.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() + 0.3;
        assert!((m.probability(&f).unwrap() - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
    }
}
