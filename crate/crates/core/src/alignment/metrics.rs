use super::vcc::Displacement;
use crate::error::{invalid, Error, Result};

/// Azimuthal angular distance in degrees, wrapping at `w_r`.
pub fn d_x(x1: f64, x2: f64, w_r: usize) -> f64 {
    let w = w_r as f64;
    let diff = (x1 - x2).abs().rem_euclid(w);
    (360.0 / w) * (w - diff).min(diff)
}

/// Elevation angular distance in degrees, same scale as azimuth.
pub fn d_y(y1: f64, y2: f64, w_r: usize) -> f64 {
    (360.0 / w_r as f64) * (y1 - y2).abs()
}

/// Angular error of one peak: panorama pixel vs photo pixel moved by `d`.
pub fn peak_error(pan_px: (f64, f64), photo_px: (f64, f64), d: Displacement, w_r: usize) -> f64 {
    let ex = d_x(pan_px.0, d.dx as f64 + photo_px.0, w_r);
    let ey = d_y(pan_px.1, d.dy as f64 + photo_px.1, w_r);
    ex.hypot(ey)
}

/// Mean angular error over corresponding peaks.
pub fn angular_error(pan_peaks: &[(f64, f64)], photo_peaks: &[(f64, f64)], d: Displacement, w_r: usize) -> Result<f64> {
    check_pairs(pan_peaks, photo_peaks)?;
    let sum: f64 = pan_peaks
        .iter()
        .zip(photo_peaks)
        .map(|(r, p)| peak_error(*r, *p, d, w_r))
        .sum();
    Ok(sum / pan_peaks.len() as f64)
}

fn check_pairs(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Empty("no peak correspondences".into()));
    }
    if a.len() != b.len() {
        return Err(invalid(format!(
            "{} panorama peaks vs {} photo peaks",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Exhaustive search for the displacement minimising [`angular_error`].
///
/// The window spans `±w_r/8` columns and `±pan_height/4` rows around the
/// median per-peak offset; ties keep the first hit in row-major scan order.
pub fn best_displacement(
    pan_peaks: &[(f64, f64)],
    photo_peaks: &[(f64, f64)],
    w_r: usize,
    pan_height: usize,
) -> Result<(Displacement, f64)> {
    check_pairs(pan_peaks, photo_peaks)?;
    let w = w_r as i64;
    let base = (pan_peaks[0].0 - photo_peaks[0].0).round() as i64;
    let mut dxs: Vec<i64> = pan_peaks
        .iter()
        .zip(photo_peaks)
        .map(|(r, p)| {
            let raw = (r.0 - p.0).round() as i64;
            // Unwrap relative to the first peak so the median is not split by the seam.
            base + (raw - base + w / 2).rem_euclid(w) - w / 2
        })
        .collect();
    let mut dys: Vec<i64> = pan_peaks
        .iter()
        .zip(photo_peaks)
        .map(|(r, p)| (r.1 - p.1).round() as i64)
        .collect();
    dxs.sort_unstable();
    dys.sort_unstable();
    let (cx, cy) = (dxs[dxs.len() / 2], dys[dys.len() / 2]);
    let (rx, ry) = ((w_r / 8) as i64, (pan_height / 4) as i64);

    let mut best = (Displacement::new(cx, cy).normalized(w_r), f64::INFINITY);
    for dy in cy - ry..=cy + ry {
        for dx in cx - rx..=cx + rx {
            let d = Displacement::new(dx, dy).normalized(w_r);
            let e = angular_error(pan_peaks, photo_peaks, d, w_r)?;
            if e < best.1 {
                best = (d, e);
            }
        }
    }
    Ok(best)
}
