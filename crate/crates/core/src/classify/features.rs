use super::{check_mask, require_rgb, MountainMask};
use crate::error::{Error, Result};
use crate::imaging::Raster;

/// 3 bands × (3×3 neighbourhood + global mean + local mean).
pub const FEATURE_LEN: usize = 33;
/// Radius of the local mean.
pub const LOCAL_RADIUS_PX: usize = 15;

/// One feature vector per mountain pixel, in row-major pixel order.
///
/// Per band: the 3×3 neighbourhood (row-major; neighbours outside the image
/// or outside the mountain area take the centre value), the mean over the
/// whole mountain area, and the mean over mountain pixels within Euclidean
/// distance `radius` of the pixel.
pub fn extract_features(img: &Raster, mountain: &MountainMask, radius: usize) -> Result<Vec<[f64; FEATURE_LEN]>> {
    check_mask(img, mountain)?;
    require_rgb(img, "feature extraction")?;
    let (w, h) = (img.width(), img.height());
    let count = mountain.count();
    if count == 0 {
        return Err(Error::Empty("mountain mask is empty".into()));
    }

    // Row prefix sums of masked values and of the mask itself.
    let mut prefix = vec![[0.0f64; 3]; h * (w + 1)];
    let mut prefix_n = vec![0u32; h * (w + 1)];
    let mut global = [0.0f64; 3];
    for y in 0..h {
        for x in 0..w {
            let (i, j) = (y * (w + 1) + x, y * (w + 1) + x + 1);
            prefix[j] = prefix[i];
            prefix_n[j] = prefix_n[i];
            if mountain.get(x, y) {
                for c in 0..3 {
                    let v = img.get(x, y, c);
                    prefix[j][c] += v;
                    global[c] += v;
                }
                prefix_n[j] += 1;
            }
        }
    }
    for g in &mut global {
        *g /= count as f64;
    }
    let r = radius as i64;
    let half_widths: Vec<i64> = (-r..=r)
        .map(|dy| {
            let rem = r * r - dy * dy;
            let mut hx = (rem as f64).sqrt() as i64;
            while hx * hx > rem {
                hx -= 1;
            }
            while (hx + 1) * (hx + 1) <= rem {
                hx += 1;
            }
            hx
        })
        .collect();

    let mut out = Vec::with_capacity(count);
    for y in 0..h {
        for x in 0..w {
            if !mountain.get(x, y) {
                continue;
            }
            let mut f = [0.0; FEATURE_LEN];
            let mut local = [0.0f64; 3];
            let mut local_n = 0u32;
            for (k, dy) in (-r..=r).enumerate() {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                let hx = half_widths[k];
                let lo = (x as i64 - hx).max(0) as usize;
                let hi = ((x as i64 + hx).min(w as i64 - 1) + 1) as usize;
                let base = yy as usize * (w + 1);
                for c in 0..3 {
                    local[c] += prefix[base + hi][c] - prefix[base + lo][c];
                }
                local_n += prefix_n[base + hi] - prefix_n[base + lo];
            }
            for c in 0..3 {
                let centre = img.get(x, y, c);
                let o = c * 11;
                let mut n = 0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        let inside = nx >= 0
                            && ny >= 0
                            && nx < w as i64
                            && ny < h as i64
                            && mountain.get(nx as usize, ny as usize);
                        f[o + n] = if inside {
                            img.get(nx as usize, ny as usize, c)
                        } else {
                            centre
                        };
                        n += 1;
                    }
                }
                f[o + 9] = global[c];
                f[o + 10] = local[c] / f64::from(local_n);
            }
            out.push(f);
        }
    }
    Ok(out)
}
