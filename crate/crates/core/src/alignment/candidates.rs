use serde::{Deserialize, Serialize};

use super::vcc::{CorrelationMap, Displacement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub displacement: Displacement,
    pub score: f64,
}

/// Top-K local maxima of a correlation map, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn displacements(&self) -> impl Iterator<Item = Displacement> + '_ {
        self.candidates.iter().map(|c| c.displacement)
    }
}

/// Euclidean pixel distance between displacements, azimuth wrapping at `w_r`.
pub fn displacement_distance(a: Displacement, b: Displacement, w_r: usize) -> f64 {
    let w = w_r as i64;
    let ddx = (a.dx - b.dx).rem_euclid(w);
    let ddx = ddx.min(w - ddx) as f64;
    let ddy = (a.dy - b.dy) as f64;
    ddx.hypot(ddy)
}

/// All strict local maxima: no 8-neighbour is larger and at least one is
/// smaller (or there are no neighbours). Columns wrap, rows do not.
pub fn local_maxima(map: &CorrelationMap) -> Vec<Candidate> {
    let (w, h) = (map.width as isize, map.rows as isize);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = map.at(c as usize, r as usize);
            let mut any_lower = false;
            let mut any_higher = false;
            let mut neighbours = 0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if (dr, dc) == (0, 0) {
                        continue;
                    }
                    let rr = r + dr;
                    if rr < 0 || rr >= h {
                        continue;
                    }
                    let cc = (c + dc).rem_euclid(w);
                    if cc == c && dc != 0 {
                        continue;
                    }
                    neighbours += 1;
                    let n = map.at(cc as usize, rr as usize);
                    any_higher |= n > v;
                    any_lower |= n < v;
                }
            }
            if !any_higher && (any_lower || neighbours == 0) {
                out.push(Candidate {
                    displacement: map.displacement(c as usize, r as usize),
                    score: v,
                });
            }
        }
    }
    out
}

/// Orders candidates by descending score, ties by `(dy, dx)` ascending.
pub fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.displacement.dy.cmp(&b.displacement.dy))
            .then(a.displacement.dx.cmp(&b.displacement.dx))
    });
}

/// Greedy non-maximum suppression over the sorted local maxima.
pub fn top_k_candidates(map: &CorrelationMap, k: usize, nms_radius: f64) -> CandidateSet {
    let mut maxima = local_maxima(map);
    sort_candidates(&mut maxima);
    let mut picked: Vec<Candidate> = Vec::with_capacity(k);
    for cand in maxima {
        if picked.len() >= k {
            break;
        }
        if picked
            .iter()
            .all(|p| displacement_distance(p.displacement, cand.displacement, map.width) >= nms_radius)
        {
            picked.push(cand);
        }
    }
    CandidateSet { candidates: picked }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with(w: usize, rows: usize, peaks: &[(usize, usize, f64)]) -> CorrelationMap {
        let mut scores = vec![0.0; w * rows];
        for &(c, r, v) in peaks {
            scores[r * w + c] = v;
        }
        CorrelationMap {
            width: w,
            rows,
            dy_min: 0,
            scores,
        }
    }

    #[test]
    fn single_peak() {
        let m = map_with(40, 20, &[(7, 9, 3.0)]);
        let c = top_k_candidates(&m, 3, 10.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c.candidates[0].displacement, Displacement::new(7, 9));
    }

    #[test]
    fn equal_peaks_tie_break() {
        let m = map_with(60, 30, &[(40, 5, 2.0), (10, 20, 2.0)]);
        let c = top_k_candidates(&m, 3, 10.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c.candidates[0].displacement, Displacement::new(40, 5));
        assert_eq!(c.candidates[1].displacement, Displacement::new(10, 20));
    }

    #[test]
    fn suppression_across_the_wrap() {
        let m = map_with(60, 10, &[(1, 5, 2.0), (58, 5, 1.5)]);
        let c = top_k_candidates(&m, 3, 10.0);
        assert_eq!(c.len(), 1);
    }
}
