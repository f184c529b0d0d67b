use super::candidates::CandidateSet;
use super::vcc::Displacement;
use crate::imaging::SkylinePath;

/// Symmetric Hausdorff distance (degrees) between the photo skyline placed at
/// `d` and the panorama skyline restricted to the columns the photo covers.
///
/// `pan_sky[c]` is the skyline row of panorama column `c`; values
/// `>= pan_height` mark empty columns. Returns `+∞` when either set is empty.
pub fn hausdorff_skyline(
    photo_sky: &SkylinePath,
    pan_sky: &[usize],
    pan_height: usize,
    d: Displacement,
    deg_per_px: f64,
) -> f64 {
    let w = pan_sky.len() as i64;
    let photo: Vec<(i64, i64)> = photo_sky
        .points()
        .map(|(x, y)| ((x as i64 + d.dx).rem_euclid(w), y as i64 + d.dy))
        .collect();
    let pan: Vec<(i64, i64)> = (0..photo_sky.width() as i64)
        .map(|x| (x + d.dx).rem_euclid(w))
        .filter_map(|c| {
            let r = pan_sky[c as usize];
            (r < pan_height).then_some((c, r as i64))
        })
        .collect();
    if photo.is_empty() || pan.is_empty() {
        return f64::INFINITY;
    }
    let dist2 = |a: (i64, i64), b: (i64, i64)| {
        let ddx = (a.0 - b.0).rem_euclid(w);
        let ddx = ddx.min(w - ddx);
        ddx * ddx + (a.1 - b.1).pow(2)
    };
    let directed = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        from.iter()
            .map(|&p| to.iter().map(|&q| dist2(p, q)).min().unwrap())
            .max()
            .unwrap()
    };
    let h2 = directed(&photo, &pan).max(directed(&pan, &photo));
    (h2 as f64).sqrt() * deg_per_px
}

/// Combined refinement score per candidate (rank 1 first):
/// `λ·(K − k + 1)/K + (1 − λ)·(1 − h_k / max_j h_j)`, maximum taken over the
/// finite distances; an infinite distance contributes 0 to the second term.
pub fn refine_scores(hausdorff: &[f64], rank_weight: f64) -> Vec<f64> {
    let k = hausdorff.len() as f64;
    let h_max = hausdorff
        .iter()
        .copied()
        .filter(|h| h.is_finite())
        .fold(0.0f64, f64::max);
    hausdorff
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let rank = (k - i as f64) / k;
            let shape = if !h.is_finite() {
                0.0
            } else if h_max > 0.0 {
                1.0 - h / h_max
            } else {
                1.0
            };
            rank_weight * rank + (1.0 - rank_weight) * shape
        })
        .collect()
}

/// Index of the best-scoring candidate; ties go to the better rank.
pub fn refine_index(hausdorff: &[f64], rank_weight: f64) -> Option<usize> {
    let scores = refine_scores(hausdorff, rank_weight);
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks the refined global displacement among the candidates.
pub fn refine(
    candidates: &CandidateSet,
    photo_sky: &SkylinePath,
    pan_sky: &[usize],
    pan_height: usize,
    deg_per_px: f64,
    rank_weight: f64,
) -> Option<(usize, Displacement, Vec<f64>)> {
    let h: Vec<f64> = candidates
        .displacements()
        .map(|d| hausdorff_skyline(photo_sky, pan_sky, pan_height, d, deg_per_px))
        .collect();
    let i = refine_index(&h, rank_weight)?;
    Some((i, candidates.candidates[i].displacement, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::Candidate;

    #[test]
    fn identical_skylines_have_zero_distance() {
        let pan: Vec<usize> = (0..100).map(|c| 20 + (c % 7)).collect();
        let photo = SkylinePath::from_rows(pan[30..50].iter().map(|r| r - 5).collect());
        let h = hausdorff_skyline(&photo, &pan, 60, Displacement::new(30, 5), 0.1);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn uniform_vertical_offset() {
        let pan: Vec<usize> = vec![20; 100];
        let photo = SkylinePath::from_rows(vec![17; 10]);
        let h = hausdorff_skyline(&photo, &pan, 60, Displacement::new(95, 0), 0.1);
        assert!((h - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_overlap_is_infinite() {
        let pan = vec![60usize; 50];
        let photo = SkylinePath::from_rows(vec![3; 5]);
        assert!(hausdorff_skyline(&photo, &pan, 60, Displacement::new(0, 0), 0.1).is_infinite());
    }

    #[test]
    fn refinement_rules() {
        assert_eq!(refine_index(&[5.0], 0.5), Some(0));
        assert_eq!(refine_index(&[1000.0, 0.0], 0.5), Some(1));
        assert_eq!(refine_index(&[0.4, 0.4, 0.4], 0.5), Some(0));
        let s = refine_scores(&[f64::INFINITY, 2.0, 0.0], 0.5);
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert!((s[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s[2] - (1.0 / 6.0 + 0.5)).abs() < 1e-12);
        assert_eq!(refine_index(&[], 0.5), None);
    }

    #[test]
    fn refine_returns_a_candidate() {
        let pan: Vec<usize> = (0..80).map(|c| 10 + (c % 5)).collect();
        let photo = SkylinePath::from_rows(pan[10..30].to_vec());
        let set = CandidateSet {
            candidates: vec![
                Candidate {
                    displacement: Displacement::new(40, 3),
                    score: 2.0,
                },
                Candidate {
                    displacement: Displacement::new(10, 0),
                    score: 1.9,
                },
            ],
        };
        let (i, d, _) = refine(&set, &photo, &pan, 30, 0.1, 0.5).unwrap();
        assert_eq!((i, d), (1, Displacement::new(10, 0)));
    }
}
