use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_mask, require_rgb, Classification, MountainMask};
use crate::error::{Error, Result};
use crate::imaging::{Raster, LUMA_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmParams {
    pub components: usize,
    /// Snow iff the snow component's posterior is at least this.
    pub posterior_threshold: f64,
    pub max_iterations: usize,
    /// Added to covariance diagonals.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 2,
            posterior_threshold: 0.5,
            max_iterations: 100,
            ridge: 1e-6,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vector3<f64>>,
    pub covariances: Vec<Matrix3<f64>>,
    pub iterations: usize,
}

struct Component {
    log_norm: f64,
    inv: Matrix3<f64>,
    mean: Vector3<f64>,
}

impl GaussianMixture {
    fn components(&self) -> Result<Vec<Component>> {
        self.covariances
            .iter()
            .zip(&self.means)
            .zip(&self.weights)
            .map(|((cov, mean), w)| {
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::Degenerate("mixture covariance is singular".into()))?;
                let log_det = 2.0 * (0..3).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
                Ok(Component {
                    log_norm: w.ln() - 0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + log_det),
                    inv: chol.inverse(),
                    mean: *mean,
                })
            })
            .collect()
    }

    /// Posterior responsibilities of every component for `p`.
    pub fn posteriors(&self, p: &Vector3<f64>) -> Result<Vec<f64>> {
        let comps = self.components()?;
        let mut out = vec![0.0; comps.len()];
        responsibilities(&comps, p, &mut out);
        Ok(out)
    }

    /// Index of the component whose mean has the highest luminance (first on ties).
    pub fn brightest(&self) -> usize {
        let luma = |m: &Vector3<f64>| LUMA_WEIGHTS[0] * m[0] + LUMA_WEIGHTS[1] * m[1] + LUMA_WEIGHTS[2] * m[2];
        let mut best = 0;
        for k in 1..self.means.len() {
            if luma(&self.means[k]) > luma(&self.means[best]) {
                best = k;
            }
        }
        best
    }
}

/// Fills `out` with responsibilities, returns the log-likelihood of `p`.
fn responsibilities(comps: &[Component], p: &Vector3<f64>, out: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (o, c) in out.iter_mut().zip(comps) {
        let d = p - c.mean;
        *o = c.log_norm - 0.5 * d.dot(&(c.inv * d));
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

fn dist2(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm_squared()
}

/// k-means++ centres drawn from `points` with a fixed seed.
fn seed_centres(points: &[Vector3<f64>], k: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            points[idx]
        } else {
            points[rng.gen_range(0..points.len())]
        };
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &next));
        }
        centres.push(next);
    }
    centres
}

/// EM fit of a full-covariance mixture.
///
/// Points are sorted before seeding so the fit does not depend on their
/// input order.
pub fn fit_gmm(points: &[Vector3<f64>], params: &GmmParams) -> Result<GaussianMixture> {
    let k = params.components;
    if k < 2 {
        return Err(Error::InvalidArgument("a mixture needs at least 2 components".into()));
    }
    if points.len() < 10 * k {
        return Err(Error::InvalidArgument(format!(
            "{} points are too few for {k} components",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    let n = pts.len();
    let ridge = Matrix3::identity() * params.ridge;

    // Hard assignment to the seeded centres gives the starting parameters.
    let centres = seed_centres(&pts, k, params.seed);
    let mut resp = vec![0.0; n * k];
    for (i, p) in pts.iter().enumerate() {
        let mut best = 0;
        for j in 1..k {
            if dist2(p, &centres[j]) < dist2(p, &centres[best]) {
                best = j;
            }
        }
        resp[i * k + best] = 1.0;
    }
    let mut gmm = m_step(&pts, &resp, k, &ridge);
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut row = vec![0.0; k];
    for _ in 0..params.max_iterations {
        iterations += 1;
        let comps = gmm.components()?;
        let mut ll = 0.0;
        for (i, p) in pts.iter().enumerate() {
            ll += responsibilities(&comps, p, &mut row);
            resp[i * k..(i + 1) * k].copy_from_slice(&row);
        }
        gmm = m_step(&pts, &resp, k, &ridge);
        if (ll - prev).abs() <= 1e-9 * ll.abs().max(1.0) {
            break;
        }
        prev = ll;
    }
    gmm.iterations = iterations;
    gmm.components()?;
    Ok(gmm)
}

fn m_step(pts: &[Vector3<f64>], resp: &[f64], k: usize, ridge: &Matrix3<f64>) -> GaussianMixture {
    let n = pts.len();
    let mut weights = vec![0.0; k];
    let mut means = vec![Vector3::zeros(); k];
    for (i, p) in pts.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            weights[j] += r;
            means[j] += p * r;
        }
    }
    let global_mean = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / n as f64;
    for j in 0..k {
        means[j] = if weights[j] > 0.0 {
            means[j] / weights[j]
        } else {
            global_mean
        };
    }
    let mut covs = vec![Matrix3::zeros(); k];
    for (i, p) in pts.iter().enumerate() {
        for j in 0..k {
            let d = p - means[j];
            covs[j] += d * d.transpose() * resp[i * k + j];
        }
    }
    for j in 0..k {
        covs[j] = if weights[j] > 0.0 {
            covs[j] / weights[j]
        } else {
            Matrix3::zeros()
        } + ridge;
        // An emptied component keeps a tiny share so its log-weight stays finite.
        weights[j] = (weights[j] / n as f64).max(f64::MIN_POSITIVE);
    }
    GaussianMixture {
        weights,
        means,
        covariances: covs,
        iterations: 0,
    }
}

/// Snow iff the posterior of the brightest component reaches the threshold.
pub fn classify_gmm(img: &Raster, mountain: &MountainMask, params: &GmmParams) -> Result<Classification> {
    check_mask(img, mountain)?;
    require_rgb(img, "GMM")?;
    let pixel = |x: usize, y: usize| {
        let p = img.pixel(x, y);
        Vector3::new(p[0], p[1], p[2])
    };
    let points: Vec<Vector3<f64>> = (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| mountain.get(x, y))
        .map(|(x, y)| pixel(x, y))
        .collect();
    let gmm = fit_gmm(&points, params)?;
    let snow = gmm.brightest();
    let comps = gmm.components()?;
    let mut row = vec![0.0; params.components];
    let mut scores = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mountain.get(x, y) {
                responsibilities(&comps, &pixel(x, y), &mut row);
                scores.push(row[snow]);
            } else {
                scores.push(f64::NAN);
            }
        }
    }
    Ok(Classification::from_scores(
        mountain,
        scores,
        params.posterior_threshold,
    ))
}
