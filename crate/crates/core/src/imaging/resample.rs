use super::raster::{BitMask, Raster};
use crate::error::{invalid, Result};

/// Bilinear resampling by `scale` to `round(w·scale) × round(h·scale)`.
pub fn resample(img: &Raster, scale: f64) -> Result<Raster> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(invalid(format!("scale must be positive, got {scale}")));
    }
    let nw = (img.width() as f64 * scale).round() as usize;
    let nh = (img.height() as f64 * scale).round() as usize;
    resize(img, nw, nh)
}

/// Bilinear resize to an explicit size (pixel-centre aligned).
pub fn resize(img: &Raster, nw: usize, nh: usize) -> Result<Raster> {
    if nw == 0 || nh == 0 {
        return Err(invalid(format!("resampled size {nw}x{nh} is empty")));
    }
    if nw == img.width() && nh == img.height() {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let sx = w as f64 / nw as f64;
    let sy = h as f64 / nh as f64;
    let ch = img.channels();
    Ok(Raster::from_fn(nw, nh, ch, |x, y, c| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let top = img.get(x0, y0, c) * (1.0 - tx) + img.get(x1, y0, c) * tx;
        let bottom = img.get(x0, y1, c) * (1.0 - tx) + img.get(x1, y1, c) * tx;
        top * (1.0 - ty) + bottom * ty
    }))
}

/// Nearest-neighbour lookup of a per-pixel grid onto a new size.
pub fn resize_nearest<T: Copy>(values: &[T], w: usize, h: usize, nw: usize, nh: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let sy = (((y as f64 + 0.5) * h as f64 / nh as f64) as usize).min(h - 1);
        for x in 0..nw {
            let sx = (((x as f64 + 0.5) * w as f64 / nw as f64) as usize).min(w - 1);
            out.push(values[sy * w + sx]);
        }
    }
    out
}

pub fn resize_mask(mask: &BitMask, nw: usize, nh: usize) -> BitMask {
    BitMask {
        width: nw,
        height: nh,
        bits: resize_nearest(&mask.bits, mask.width, mask.height, nw, nh),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scale() {
        let img = Raster::from_fn(5, 4, 3, |x, y, c| ((x + y + c) % 4) as f64 / 3.0);
        assert_eq!(resample(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn halving_dimensions() {
        let img = Raster::filled(100, 100, 1, 0.2);
        let r = resample(&img, 0.5).unwrap();
        assert_eq!((r.width(), r.height()), (50, 50));
    }

    #[test]
    fn constant_stays_constant() {
        let img = Raster::filled(37, 23, 3, 0.61);
        for s in [0.3, 0.77, 1.9] {
            let r = resample(&img, s).unwrap();
            assert!(r.data().iter().all(|v| (v - 0.61).abs() < 1e-12));
        }
    }

    #[test]
    fn empty_result_is_an_error() {
        assert!(resample(&Raster::filled(3, 3, 1, 0.0), 0.01).is_err());
        assert!(resample(&Raster::filled(3, 3, 1, 0.0), -1.0).is_err());
    }
}
