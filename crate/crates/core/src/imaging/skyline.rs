use serde::{Deserialize, Serialize};

use super::morphology::dilate_edges_circular;
use super::raster::EdgeMap;
use crate::dem::Panorama;
use crate::error::{Error, Result};

/// One skyline row per image column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkylinePath {
    pub row_of_column: Vec<usize>,
    pub valid: Vec<bool>,
}

impl SkylinePath {
    pub fn from_rows(rows: Vec<usize>) -> Self {
        let valid = vec![true; rows.len()];
        Self {
            row_of_column: rows,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.row_of_column.len()
    }

    pub fn row(&self, c: usize) -> Option<usize> {
        self.valid[c].then(|| self.row_of_column[c])
    }

    /// `(column, row)` for every valid column.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_of_column
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, v))| **v)
            .map(|(c, (r, _))| (c, *r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkylineParams {
    /// Per-pixel bias (scaled by `row / height`) favouring upper paths.
    pub upper_bias: f64,
    /// Transition cost per row of vertical movement between columns.
    pub step_penalty: f64,
    pub max_jump: usize,
}

impl Default for SkylineParams {
    fn default() -> Self {
        Self {
            upper_bias: 0.1,
            step_penalty: 0.02,
            max_jump: 5,
        }
    }
}

/// Node cost of placing the skyline at `(c, r)`.
pub fn skyline_node_cost(edges: &EdgeMap, params: &SkylineParams, c: usize, r: usize) -> f64 {
    1.0 - edges.strength_at(c, r) + params.upper_bias * (r as f64 / edges.height as f64)
}

/// Total cost of a complete left-to-right path, or `None` if a jump is too large.
pub fn skyline_path_cost(edges: &EdgeMap, params: &SkylineParams, rows: &[usize]) -> Option<f64> {
    let mut cost = 0.0;
    for (c, &r) in rows.iter().enumerate() {
        cost += skyline_node_cost(edges, params, c, r);
        if c > 0 {
            let jump = r.abs_diff(rows[c - 1]);
            if jump > params.max_jump {
                return None;
            }
            cost += params.step_penalty * jump as f64;
        }
    }
    Some(cost)
}

/// Globally optimal skyline path by dynamic programming over columns.
///
/// Ties between equal-cost predecessors resolve to the upper row.
pub fn detect_skyline(edges: &EdgeMap, params: &SkylineParams) -> SkylinePath {
    let (w, h) = (edges.width, edges.height);
    if w == 0 || h == 0 {
        return SkylinePath::from_rows(vec![0; w]);
    }
    let mut acc: Vec<f64> = (0..h).map(|r| skyline_node_cost(edges, params, 0, r)).collect();
    let mut back = vec![0u32; w * h];
    let mut next = vec![0.0; h];
    for c in 1..w {
        for r in 0..h {
            let lo = r.saturating_sub(params.max_jump);
            let hi = (r + params.max_jump).min(h - 1);
            let mut best = f64::INFINITY;
            let mut arg = lo;
            for p in lo..=hi {
                let v = acc[p] + params.step_penalty * r.abs_diff(p) as f64;
                if v < best {
                    best = v;
                    arg = p;
                }
            }
            next[r] = best + skyline_node_cost(edges, params, c, r);
            back[c * h + r] = arg as u32;
        }
        std::mem::swap(&mut acc, &mut next);
    }
    let mut end = 0;
    for r in 1..h {
        if acc[r] < acc[end] {
            end = r;
        }
    }
    let mut rows = vec![0usize; w];
    rows[w - 1] = end;
    for c in (1..w).rev() {
        rows[c - 1] = back[c * h + rows[c]] as usize;
    }
    SkylinePath::from_rows(rows)
}

/// Removes edges above the skyline and attenuates those below it by
/// `exp(-angular_distance / decay_deg)`.
pub fn weight_edges_below_skyline(
    edges: &EdgeMap,
    sky: &SkylinePath,
    decay_deg: f64,
    deg_per_px: f64,
) -> Result<EdgeMap> {
    if sky.width() != edges.width {
        return Err(Error::DimensionMismatch(format!(
            "skyline has {} columns, edge map {}",
            sky.width(),
            edges.width
        )));
    }
    let mut out = edges.clone();
    for c in 0..edges.width {
        let top = match sky.row(c) {
            Some(r) => r,
            None => {
                for r in 0..edges.height {
                    let i = out.idx(c, r);
                    out.strength[i] = 0.0;
                }
                continue;
            }
        };
        for r in 0..edges.height {
            let i = out.idx(c, r);
            if r < top {
                out.strength[i] = 0.0;
            } else {
                let dist_deg = (r - top) as f64 * deg_per_px;
                out.strength[i] *= (-dist_deg / decay_deg).exp();
            }
        }
    }
    Ok(out)
}

/// Keeps the topmost edge pixel of every column.
pub fn upper_envelope(edges: &EdgeMap) -> EdgeMap {
    let mut out = EdgeMap::zeros(edges.width, edges.height);
    for c in 0..edges.width {
        if let Some(r) = (0..edges.height).find(|&r| edges.strength_at(c, r) > 0.0) {
            let i = edges.idx(c, r);
            out.strength[i] = edges.strength[i];
            out.direction[i] = edges.direction[i];
        }
    }
    out
}

/// Panorama skyline edges: the upper envelope of the edge map, dilated
/// with columns wrapping.
pub fn panorama_skyline_edges(pan: &Panorama, radius_px: usize) -> EdgeMap {
    dilate_edges_circular(&upper_envelope(&pan.edges), radius_px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_best(edges: &EdgeMap, params: &SkylineParams) -> f64 {
        // Depth-first enumeration of every feasible path; pruning only drops
        // partial paths already costlier than a complete one (costs are >= 0).
        fn go(edges: &EdgeMap, params: &SkylineParams, rows: &mut Vec<usize>, partial: f64, best: &mut f64) {
            let c = rows.len();
            if c == edges.width {
                *best = best.min(partial);
                return;
            }
            for r in 0..edges.height {
                let mut add = 1.0 - edges.strength_at(c, r) + params.upper_bias * r as f64 / edges.height as f64;
                if let Some(&prev) = rows.last() {
                    let jump = r.abs_diff(prev);
                    if jump > params.max_jump {
                        continue;
                    }
                    add += params.step_penalty * jump as f64;
                }
                if partial + add >= *best {
                    continue;
                }
                rows.push(r);
                go(edges, params, rows, partial + add, best);
                rows.pop();
            }
        }
        let mut best = f64::INFINITY;
        go(edges, params, &mut Vec::new(), 0.0, &mut best);
        best
    }

    fn random_edges(rng: &mut ChaCha8Rng, w: usize, h: usize) -> EdgeMap {
        let mut e = EdgeMap::zeros(w, h);
        for s in &mut e.strength {
            *s = if rng.gen_bool(0.4) { rng.gen() } else { 0.0 };
        }
        e
    }

    #[test]
    fn single_line_is_followed() {
        let mut e = EdgeMap::zeros(30, 60);
        for c in 0..30 {
            e.set(c, 40, 1.0, 0.0);
        }
        let p = detect_skyline(&e, &SkylineParams::default());
        assert!(p.row_of_column.iter().all(|&r| r == 40));
    }

    #[test]
    fn stronger_upper_line_wins() {
        let mut e = EdgeMap::zeros(30, 60);
        for c in 0..30 {
            e.set(c, 10, 1.0, 0.0);
            e.set(c, 45, 0.6, 0.0);
        }
        let p = detect_skyline(&e, &SkylineParams::default());
        assert!(p.row_of_column.iter().all(|&r| r == 10));
    }

    #[test]
    fn constant_map_gives_top_path() {
        let p = detect_skyline(&EdgeMap::zeros(9, 7), &SkylineParams::default());
        assert!(p.row_of_column.iter().all(|&r| r == 0));
        assert!(p.valid.iter().all(|v| *v));
    }

    #[test]
    fn dp_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = SkylineParams {
            max_jump: 2,
            ..SkylineParams::default()
        };
        for _ in 0..40 {
            let w = rng.gen_range(1..=8);
            let h = rng.gen_range(1..=6);
            let e = random_edges(&mut rng, w, h);
            let p = detect_skyline(&e, &params);
            let dp = skyline_path_cost(&e, &params, &p.row_of_column).unwrap();
            assert!((dp - brute_force_best(&e, &params)).abs() < 1e-9);
        }
    }

    #[test]
    fn weighting_rules() {
        let mut e = EdgeMap::zeros(3, 10);
        for r in 0..10 {
            e.set(1, r, 0.9, 0.2);
        }
        let sky = SkylinePath::from_rows(vec![4, 4, 4]);
        let out = weight_edges_below_skyline(&e, &sky, 1.0, 0.1).unwrap();
        assert_eq!(out.strength_at(1, 3), 0.0);
        assert_eq!(out.strength_at(1, 4), 0.9);
        // 20 px at 0.1°/px = 2 decay lengths; use a taller map.
        let mut tall = EdgeMap::zeros(1, 40);
        tall.set(0, 25, 0.8, 0.0);
        let sky = SkylinePath::from_rows(vec![5]);
        let out = weight_edges_below_skyline(&tall, &sky, 1.0, 0.1).unwrap();
        let expect = 0.8 * (-2.0f64).exp();
        assert!(((out.strength_at(0, 25) - expect) / expect).abs() <= 1e-9);
    }

    #[test]
    fn envelope_keeps_topmost() {
        let mut e = EdgeMap::zeros(4, 60);
        e.set(2, 10, 0.5, 0.3);
        e.set(2, 50, 1.0, 0.0);
        let env = upper_envelope(&e);
        assert_eq!(env.strength_at(2, 10), 0.5);
        assert_eq!(env.strength_at(2, 50), 0.0);
        assert!(upper_envelope(&EdgeMap::zeros(5, 5)).strength.iter().all(|s| *s == 0.0));
    }
}
