use snowcover_core::dem::{
    destination, elevation_angle_deg, haversine_m, render_panorama, DemGrid, GeoPoint, Peak, RenderOptions,
    EARTH_RADIUS_M,
};
use snowcover_core::synthetic::{procedural_terrain, TerrainParams};

const LAT: f64 = 46.0;
const LON: f64 = 9.0;
const N: usize = 401;

fn observer() -> GeoPoint {
    let half = (N - 1) as f64 / 2.0 * 3.0 / 3600.0;
    GeoPoint::new(LAT - half, LON + half).unwrap()
}

/// Flat plain at 0 m with a cone of `height` and base `radius` at `apex`.
fn cone_dem(apex: (f64, f64), height: f64, radius: f64) -> DemGrid {
    let origin = GeoPoint::new(LAT, LON).unwrap();
    let apex = GeoPoint::new(apex.0, apex.1).unwrap();
    let step = 3.0 / 3600.0;
    let mut samples = Vec::with_capacity(N * N);
    for r in 0..N {
        for c in 0..N {
            let p = GeoPoint::new(LAT - r as f64 * step, LON + c as f64 * step).unwrap();
            let d = haversine_m(&p, &apex);
            samples.push((height * (1.0 - d / radius)).max(0.0) as f32);
        }
    }
    DemGrid::from_samples(origin, 3.0, N, N, samples).unwrap()
}

fn opts(width: usize) -> RenderOptions {
    RenderOptions {
        width_px: width,
        max_distance_m: 15_000.0,
        top_elevation_deg: 20.0,
        bottom_elevation_deg: -10.0,
        ..RenderOptions::default()
    }
}

/// Azimuth from local east/north components of the Earth-centred chord.
fn ecef_azimuth(from: &GeoPoint, to: &GeoPoint) -> f64 {
    let ecef = |p: &GeoPoint| {
        let (phi, lam) = (p.lat.to_radians(), p.lon.to_radians());
        [
            EARTH_RADIUS_M * phi.cos() * lam.cos(),
            EARTH_RADIUS_M * phi.cos() * lam.sin(),
            EARTH_RADIUS_M * phi.sin(),
        ]
    };
    let (a, b) = (ecef(from), ecef(to));
    let v = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let (phi, lam) = (from.lat.to_radians(), from.lon.to_radians());
    let east = [-lam.sin(), lam.cos(), 0.0];
    let north = [-phi.sin() * lam.cos(), -phi.sin() * lam.sin(), phi.cos()];
    let dot = |u: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    dot(east).atan2(dot(north)).to_degrees().rem_euclid(360.0)
}

#[test]
fn conical_hill_matches_geometry() {
    let obs = observer();
    let (height, radius, dist, az) = (1000.0, 4000.0, 8000.0, 57.0);
    let apex = destination(&obs, az, dist);
    let dem = cone_dem(apex, height, radius);
    let apex_pt = GeoPoint::new(apex.0, apex.1).unwrap();
    let peak = Peak {
        name: "cone".into(),
        position: apex_pt.with_elevation(height),
        elevation_m: height,
    };
    let pan = render_panorama(&dem, &obs, &[peak], &opts(3600)).unwrap();
    let eye = pan.observer.elevation_m.unwrap();

    let (top_col, top_angle) = pan
        .skyline_angle_deg
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let expect_angle = elevation_angle_deg(height, eye, dist);
    assert!((top_angle - expect_angle).abs() < 0.15, "{top_angle} vs {expect_angle}");

    let expect_col = pan.column_of_azimuth(ecef_azimuth(&obs, &apex_pt)) as i64;
    let dc = (top_col as i64 - expect_col).rem_euclid(3600);
    assert!(dc.min(3600 - dc) <= 1, "column {top_col} vs {expect_col}");

    let depth = f64::from(pan.depth_at(top_col, pan.skyline[top_col]));
    assert!((depth - dist).abs() < 150.0, "depth {depth}");

    let p = &pan.peaks[0];
    assert!((p.column as i64 - expect_col).abs() <= 1);
    assert!(
        p.row.abs_diff(pan.skyline[p.column]) <= 1,
        "peak row {} skyline {}",
        p.row,
        pan.skyline[p.column]
    );
}

#[test]
fn azimuth_origin_rotates_columns() {
    let t = procedural_terrain(5, &TerrainParams::default()).unwrap();
    let a = render_panorama(&t.dem, &t.observer, &t.peaks, &opts(720)).unwrap();
    let shifted = RenderOptions {
        azimuth_origin_deg: 90.0,
        ..opts(720)
    };
    let b = render_panorama(&t.dem, &t.observer, &t.peaks, &shifted).unwrap();
    for c in 0..720 {
        let src = (c + 180) % 720;
        assert_eq!(b.skyline[c], a.skyline[src]);
        for r in 0..a.height_px {
            assert_eq!(b.depth_at(c, r).to_bits(), a.depth_at(src, r).to_bits());
        }
    }
}

#[test]
fn raising_terrain_never_lowers_the_skyline() {
    let t = procedural_terrain(9, &TerrainParams::default()).unwrap();
    let before = render_panorama(&t.dem, &t.observer, &[], &opts(720)).unwrap();
    let mut samples = t.dem.samples().to_vec();
    let n = t.dem.cols;
    for r in 0..t.dem.rows {
        for c in 0..n {
            let (dr, dc) = (r as f64 - 150.0, c as f64 - 300.0);
            samples[r * n + c] += (900.0 * (-(dr * dr + dc * dc) / 800.0).exp()) as f32;
        }
    }
    let dem = DemGrid::from_samples(t.dem.origin, 3.0, t.dem.rows, n, samples).unwrap();
    let after = render_panorama(&dem, &t.observer, &[], &opts(720)).unwrap();
    let mut raised = 0;
    for c in 0..720 {
        assert!(after.skyline[c] <= before.skyline[c], "column {c}");
        raised += (after.skyline[c] < before.skyline[c]) as usize;
    }
    assert!(raised > 0);
}

#[test]
fn projected_peaks_sit_on_terrain() {
    let t = procedural_terrain(2, &TerrainParams::default()).unwrap();
    let pan = render_panorama(&t.dem, &t.observer, &t.peaks, &opts(1800)).unwrap();
    assert!(!pan.peaks.is_empty());
    for p in &pan.peaks {
        // Never above the skyline, and on a terrain pixel.
        assert!(
            p.row + 1 >= pan.skyline[p.column],
            "{} floats above the skyline",
            p.peak.name
        );
        let r = p.row.min(pan.height_px - 1);
        let near_terrain =
            (r.saturating_sub(1)..=(r + 1).min(pan.height_px - 1)).any(|rr| pan.depth_at(p.column, rr).is_finite());
        assert!(near_terrain, "{}", p.peak.name);
    }
}
