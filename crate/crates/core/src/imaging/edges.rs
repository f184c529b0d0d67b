use std::f64::consts::FRAC_PI_2;

use super::raster::{fold_direction, EdgeMap, Raster};
use crate::error::{invalid, Result};

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

pub fn to_gray(img: &Raster) -> Result<Raster> {
    if img.channels() != 3 {
        return Err(invalid("to_gray expects an RGB raster"));
    }
    Ok(Raster::from_fn(img.width(), img.height(), 1, |x, y, _| {
        let p = img.pixel(x, y);
        LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]
    }))
}

fn gray_values(img: &Raster) -> Vec<f64> {
    if img.channels() == 1 {
        img.data().to_vec()
    } else {
        img.data()
            .chunks_exact(3)
            .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
            .collect()
    }
}

/// Sobel gradient on the luminance, magnitude normalised by the image maximum.
///
/// The stored direction is the edge tangent (gradient orientation + 90°),
/// folded onto `[0, π)` in pixel coordinates (x right, y down).
pub fn extract_edges(img: &Raster) -> EdgeMap {
    let (w, h) = (img.width(), img.height());
    let g = gray_values(img);
    let at = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        g[cy * w + cx]
    };

    let mut edges = EdgeMap::zeros(w, h);
    let mut max_mag = 0.0f64;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let mag = gx.hypot(gy);
            let i = y as usize * w + x as usize;
            edges.strength[i] = mag;
            edges.direction[i] = if mag > 0.0 {
                fold_direction(gy.atan2(gx) + FRAC_PI_2)
            } else {
                0.0
            };
            max_mag = max_mag.max(mag);
        }
    }
    // Sub-ulp gradients from constant images are treated as flat.
    if max_mag > 1e-12 {
        for s in &mut edges.strength {
            *s /= max_mag;
        }
    } else {
        edges.strength.iter_mut().for_each(|s| *s = 0.0);
        edges.direction.iter_mut().for_each(|d| *d = 0.0);
    }
    edges
}
