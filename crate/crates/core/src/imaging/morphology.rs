use super::raster::EdgeMap;

/// Offsets of the discrete disk `dx² + dy² ≤ r²`, centre first.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = vec![(0, 0)];
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx, dy) != (0, 0) && dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn dilate(edges: &EdgeMap, offsets: &[(isize, isize)], wrap_x: bool) -> EdgeMap {
    let (w, h) = (edges.width as isize, edges.height as isize);
    let mut out = EdgeMap::zeros(edges.width, edges.height);
    for y in 0..h {
        for x in 0..w {
            let mut best = 0.0;
            let mut dir = 0.0;
            for &(dx, dy) in offsets {
                let (mut sx, sy) = (x + dx, y + dy);
                if sy < 0 || sy >= h {
                    continue;
                }
                if wrap_x {
                    sx = sx.rem_euclid(w);
                } else if sx < 0 || sx >= w {
                    continue;
                }
                let i = (sy * w + sx) as usize;
                if edges.strength[i] > best {
                    best = edges.strength[i];
                    dir = edges.direction[i];
                }
            }
            let o = (y * w + x) as usize;
            out.strength[o] = best;
            out.direction[o] = dir;
        }
    }
    out
}

/// Grey-level dilation over a disk; the direction of the maximising pixel
/// is carried along (centre pixel wins ties).
pub fn dilate_edges(edges: &EdgeMap, radius_px: usize) -> EdgeMap {
    dilate(edges, &disk_offsets(radius_px), false)
}

/// Same as [`dilate_edges`] with columns wrapping around (panoramas).
pub fn dilate_edges_circular(edges: &EdgeMap, radius_px: usize) -> EdgeMap {
    dilate(edges, &disk_offsets(radius_px), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn disk_of_radius_two() {
        let mut e = EdgeMap::zeros(9, 9);
        e.set(4, 4, 1.0, 0.7);
        let d = dilate_edges(&e, 2);
        assert_eq!(d.strength.iter().filter(|s| **s == 1.0).count(), 13);
        assert!((d.direction_at(4, 6) - 0.7).abs() < 1e-12);
        assert_eq!(d.strength_at(6, 6), 0.0);
    }

    #[test]
    fn zero_map_stays_zero() {
        let d = dilate_edges(&EdgeMap::zeros(6, 4), 3);
        assert!(d.strength.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn matches_naive_max_and_is_extensive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut e = EdgeMap::zeros(13, 11);
        for s in &mut e.strength {
            *s = if rng.gen_bool(0.2) { rng.gen() } else { 0.0 };
        }
        let d = dilate_edges(&e, 2);
        for y in 0..11i32 {
            for x in 0..13i32 {
                let mut m = 0.0f64;
                for yy in 0..11i32 {
                    for xx in 0..13i32 {
                        if (xx - x).pow(2) + (yy - y).pow(2) <= 4 {
                            m = m.max(e.strength_at(xx as usize, yy as usize));
                        }
                    }
                }
                assert_eq!(d.strength_at(x as usize, y as usize), m);
                assert!(d.strength_at(x as usize, y as usize) >= e.strength_at(x as usize, y as usize));
            }
        }
        let composed = dilate_edges(&dilate_edges(&e, 1), 2);
        for (a, b) in composed.strength.iter().zip(&d.strength) {
            assert!(a >= b);
        }
    }

    #[test]
    fn circular_dilation_wraps() {
        let mut e = EdgeMap::zeros(10, 3);
        e.set(0, 1, 1.0, 0.0);
        let d = dilate_edges_circular(&e, 1);
        assert_eq!(d.strength_at(9, 1), 1.0);
        assert_eq!(dilate_edges(&e, 1).strength_at(9, 1), 0.0);
    }
}
