use serde::{Deserialize, Serialize};

use super::vcc::{edge_vector, Displacement};
use crate::dem::ProjectedPeak;
use crate::imaging::EdgeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalParams {
    /// Search radius around the global solution.
    pub window_px: usize,
    /// Half-size of the photo patch centred on the peak.
    pub patch_px: usize,
    /// Photo edges weaker than this (strengths are normalised to the
    /// strongest edge) are shading, not structure, and take no part.
    pub min_strength: f64,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self {
            window_px: 20,
            patch_px: 30,
            min_strength: 0.1,
        }
    }
}

/// Locally refined placement of one panorama peak in the photo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPeak {
    pub name: String,
    pub pan_x: usize,
    pub pan_y: usize,
    /// Peak position in the (panorama-scaled) photo implied by `displacement`.
    pub photo_x: i64,
    pub photo_y: i64,
    pub displacement: Displacement,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalAlignment {
    pub peaks: Vec<LocalPeak>,
    /// Peaks that fall outside the photo under the global displacement.
    pub dropped: Vec<String>,
}

/// Search offsets ordered by distance from zero, then row-major.
fn ordered_offsets(window: i64) -> Vec<(i64, i64)> {
    let mut o: Vec<(i64, i64)> = (-window..=window)
        .flat_map(|oy| (-window..=window).map(move |ox| (ox, oy)))
        .collect();
    o.sort_by_key(|&(ox, oy)| (ox * ox + oy * oy, oy, ox));
    o
}

/// Per-peak VCC over a `(2·window + 1)²` neighbourhood of the global solution.
///
/// Each peak's photo patch (half-size `patch_px`) is correlated against the
/// panorama at every offset; a strictly better score is needed to move away
/// from smaller offsets, so featureless patches keep the global displacement.
pub fn local_align(
    photo: &EdgeMap,
    pan: &EdgeMap,
    global: Displacement,
    peaks: &[ProjectedPeak],
    params: &LocalParams,
) -> LocalAlignment {
    let w = pan.width as i64;
    let (pw, ph) = (photo.width as i64, photo.height as i64);
    let offsets = ordered_offsets(params.window_px as i64);
    let patch = params.patch_px as i64;
    let mut out = LocalAlignment::default();

    for peak in peaks {
        let px = (peak.column as i64 - global.dx).rem_euclid(w);
        let py = peak.row as i64 - global.dy;
        if px >= pw || py < 0 || py >= ph {
            out.dropped.push(peak.peak.name.clone());
            continue;
        }
        let mut cells = Vec::new();
        for y in (py - patch).max(0)..=(py + patch).min(ph - 1) {
            for x in (px - patch).max(0)..=(px + patch).min(pw - 1) {
                let i = photo.idx(x as usize, y as usize);
                if photo.strength[i] >= params.min_strength && photo.strength[i] > 0.0 {
                    cells.push((x, y, edge_vector(photo.strength[i], photo.direction[i])));
                }
            }
        }
        let mut best = (0i64, 0i64, f64::NEG_INFINITY);
        for &(ox, oy) in &offsets {
            let d = global.offset(ox, oy, pan.width);
            let mut score = 0.0;
            for &(x, y, v) in &cells {
                let ty = y + d.dy;
                if ty < 0 || ty >= pan.height as i64 {
                    continue;
                }
                let tx = (x + d.dx).rem_euclid(w) as usize;
                let j = pan.idx(tx, ty as usize);
                if pan.strength[j] > 0.0 {
                    let q = edge_vector(pan.strength[j], pan.direction[j]);
                    score += v.re * q.re + v.im * q.im;
                }
            }
            if score > best.2 {
                best = (ox, oy, score);
            }
        }
        let d = global.offset(best.0, best.1, pan.width);
        out.peaks.push(LocalPeak {
            name: peak.peak.name.clone(),
            pan_x: peak.column,
            pan_y: peak.row,
            photo_x: (peak.column as i64 - d.dx).rem_euclid(w),
            photo_y: peak.row as i64 - d.dy,
            displacement: d,
            score: best.2,
        });
    }
    out
}
