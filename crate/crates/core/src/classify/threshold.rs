use super::{check_mask, require_rgb, Classification, MountainMask};
use crate::error::Result;
use crate::imaging::{Raster, LUMA_WEIGHTS};

pub const HISTOGRAM_BINS: usize = 256;
/// Moving-average window applied before the valley scan.
pub const SMOOTHING_WINDOW: usize = 5;

/// Snow iff grey level `>= threshold` on the mountain area. RGB input is
/// converted to luminance first.
pub fn classify_fixed_threshold(img: &Raster, mountain: &MountainMask, threshold: f64) -> Result<Classification> {
    check_mask(img, mountain)?;
    let scores = (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            if !mountain.get(x, y) {
                return f64::NAN;
            }
            let p = img.pixel(x, y);
            if p.len() == 3 {
                LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]
            } else {
                p[0]
            }
        })
        .collect();
    Ok(Classification::from_scores(mountain, scores, threshold))
}

fn blue_bin(v: f64) -> usize {
    (v * 255.0).round().clamp(0.0, 255.0) as usize
}

/// Histogram of the blue channel (bins 0..=255) over the mountain area.
pub fn blue_histogram(img: &Raster, mountain: &MountainMask) -> Result<Vec<f64>> {
    check_mask(img, mountain)?;
    require_rgb(img, "blue histogram")?;
    let mut hist = vec![0.0; HISTOGRAM_BINS];
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mountain.get(x, y) {
                hist[blue_bin(img.get(x, y, 2))] += 1.0;
            }
        }
    }
    Ok(hist)
}

/// Centred moving average; the window is truncated at both ends.
pub fn smooth_histogram(hist: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..hist.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(hist.len() - 1);
            hist[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// First bin `h > base` with `H[h−1] > H[h] <= H[h+1]` on the smoothed
/// histogram, or `base` when there is none.
pub fn snow_nosnow_threshold(hist: &[f64], base: usize) -> usize {
    let s = smooth_histogram(hist, SMOOTHING_WINDOW);
    (base + 1..s.len().saturating_sub(1))
        .find(|&h| s[h - 1] > s[h] && s[h] <= s[h + 1])
        .unwrap_or(base)
}

/// Blue-band threshold at the first histogram valley above `base_bin`.
pub fn classify_snow_nosnow(img: &Raster, mountain: &MountainMask, base_bin: usize) -> Result<Classification> {
    let hist = blue_histogram(img, mountain)?;
    let t = snow_nosnow_threshold(&hist, base_bin);
    let scores = (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            if mountain.get(x, y) {
                blue_bin(img.get(x, y, 2)) as f64
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(Classification::from_scores(mountain, scores, t as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::SnowLabel;
    use crate::imaging::BitMask;

    #[test]
    fn fixed_threshold_is_inclusive() {
        let img = Raster::new(3, 1, 1, vec![0.7, 0.5, 0.2]).unwrap();
        let mut m = BitMask::new(3, 1, true);
        let c = classify_fixed_threshold(&img, &m, 0.5).unwrap();
        assert_eq!(c.mask.labels, vec![SnowLabel::Snow, SnowLabel::Snow, SnowLabel::NoSnow]);
        m.set(0, 0, false);
        let c = classify_fixed_threshold(&img, &m, 0.5).unwrap();
        assert_eq!(c.mask.get(0, 0), SnowLabel::Outside);
    }

    #[test]
    fn valley_is_found_above_base() {
        let hist: Vec<f64> = (0..256)
            .map(|b| {
                let b = b as f64;
                1000.0 * (-(b - 60.0).powi(2) / 800.0).exp() + 1000.0 * (-(b - 220.0).powi(2) / 800.0).exp() + 1.0
            })
            .collect();
        // Independent scan on the smoothed histogram.
        let s = smooth_histogram(&hist, 5);
        let oracle = (128..255).find(|&h| s[h - 1] > s[h] && s[h] <= s[h + 1]).unwrap();
        assert_eq!(snow_nosnow_threshold(&hist, 127), oracle);
        assert_eq!(oracle, 140);
    }

    #[test]
    fn monotone_histogram_keeps_base() {
        let hist: Vec<f64> = (0..256).map(|b| b as f64).collect();
        assert_eq!(snow_nosnow_threshold(&hist, 127), 127);
    }

    #[test]
    fn bright_image_is_all_snow() {
        let img = Raster::filled(4, 4, 3, 1.0);
        let c = classify_snow_nosnow(&img, &BitMask::new(4, 4, true), 127).unwrap();
        assert_eq!(c.mask.count(SnowLabel::Snow), 16);
    }

    #[test]
    fn smoothing_truncates_at_ends() {
        let s = smooth_histogram(&[5.0, 0.0, 0.0, 0.0, 0.0, 0.0], 5);
        assert!((s[0] - 5.0 / 3.0).abs() < 1e-12);
        assert!((s[2] - 1.0).abs() < 1e-12);
        assert_eq!(s[3], 0.0);
    }
}
