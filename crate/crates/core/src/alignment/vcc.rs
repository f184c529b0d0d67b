use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imaging::EdgeMap;

/// Photo-to-panorama offset: photo pixel `(x, y)` lands on panorama pixel
/// `((x + dx) mod w_r, y + dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: i64,
    pub dy: i64,
}

impl Displacement {
    pub fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    /// Wraps `dx` onto `[0, w_r)`.
    pub fn normalized(self, w_r: usize) -> Self {
        Self {
            dx: self.dx.rem_euclid(w_r as i64),
            dy: self.dy,
        }
    }

    pub fn offset(self, ox: i64, oy: i64, w_r: usize) -> Self {
        Self::new(self.dx + ox, self.dy + oy).normalized(w_r)
    }
}

/// Edge pixel as a doubled-angle planar vector, so that orientations `θ`
/// and `θ + π` reinforce each other.
#[inline]
pub fn edge_vector(strength: f64, direction: f64) -> Complex<f64> {
    Complex::from_polar(strength, 2.0 * direction)
}

/// VCC score for every displacement with at least one overlapping row.
///
/// Rows cover `dy ∈ [dy_min, dy_min + rows)`, columns cover `dx ∈ [0, width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMap {
    pub width: usize,
    pub rows: usize,
    pub dy_min: i64,
    pub scores: Vec<f64>,
}

impl CorrelationMap {
    pub fn score(&self, d: Displacement) -> Option<f64> {
        let row = d.dy - self.dy_min;
        if row < 0 || row >= self.rows as i64 {
            return None;
        }
        let col = d.dx.rem_euclid(self.width as i64) as usize;
        Some(self.scores[row as usize * self.width + col])
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    pub fn displacement(&self, col: usize, row: usize) -> Displacement {
        Displacement::new(col as i64, row as i64 + self.dy_min)
    }
}

fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

struct Fft2 {
    w: usize,
    h: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(planner: &mut FftPlanner<f64>, w: usize, h: usize, inverse: bool) -> Self {
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
        } else {
            (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
        };
        Self { w, h, row, col }
    }

    /// Row-major input, column-major (transposed) spectrum out.
    fn forward(&self, data: &mut [Complex<f64>]) -> Vec<Complex<f64>> {
        data.par_chunks_mut(self.w).for_each(|r| self.row.process(r));
        let mut t = transpose(data, self.w, self.h);
        t.par_chunks_mut(self.h).for_each(|c| self.col.process(c));
        t
    }

    /// Inverse of `forward`: column-major input, row-major output.
    fn inverse(&self, data: &mut [Complex<f64>]) -> Vec<Complex<f64>> {
        data.par_chunks_mut(self.h).for_each(|c| self.col.process(c));
        let mut t = transpose(data, self.h, self.w);
        t.par_chunks_mut(self.w).for_each(|r| self.row.process(r));
        t
    }
}

fn transpose(data: &[Complex<f64>], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = data[y * w + x];
        }
    }
    out
}

/// Vector cross-correlation of a photo edge map against a panorama edge map.
///
/// `score(dx, dy) = Σ_{x,y} v_photo(x, y) · v_pan((x + dx) mod w_r, y + dy)`,
/// circular in azimuth and zero-padded vertically. Computed in the Fourier
/// domain as the real part of a complex cross-correlation.
pub fn vcc_correlate(photo: &EdgeMap, pan: &EdgeMap) -> Result<CorrelationMap> {
    let (pw, ph) = (photo.width, photo.height);
    let (w, h) = (pan.width, pan.height);
    if pw == 0 || ph == 0 || w == 0 || h == 0 {
        return Err(invalid("empty edge map"));
    }
    if pw > w {
        return Err(invalid(format!("photo width {pw} exceeds panorama width {w}")));
    }
    let rows = h + ph - 1;
    let hp = next_smooth(rows);

    let zero = Complex::new(0.0, 0.0);
    let mut a = vec![zero; w * hp];
    for y in 0..ph {
        for x in 0..pw {
            let i = photo.idx(x, y);
            a[y * w + x] = edge_vector(photo.strength[i], photo.direction[i]);
        }
    }
    let mut b = vec![zero; w * hp];
    for y in 0..h {
        for x in 0..w {
            let i = pan.idx(x, y);
            b[(y + ph - 1) * w + x] = edge_vector(pan.strength[i], pan.direction[i]);
        }
    }

    let mut planner = FftPlanner::new();
    let fwd = Fft2::new(&mut planner, w, hp, false);
    let inv = Fft2::new(&mut planner, w, hp, true);
    let fa = fwd.forward(&mut a);
    let mut fb = fwd.forward(&mut b);
    fb.par_iter_mut().zip(fa.par_iter()).for_each(|(q, p)| *q *= p.conj());
    let c = inv.inverse(&mut fb);

    let norm = 1.0 / (w * hp) as f64;
    let scores = c[..rows * w].iter().map(|v| v.re * norm).collect();
    Ok(CorrelationMap {
        width: w,
        rows,
        dy_min: -(ph as i64 - 1),
        scores,
    })
}
