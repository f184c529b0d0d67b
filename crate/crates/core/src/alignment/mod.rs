//! Photo-to-panorama alignment.
//!
//! The photograph is rescaled to the panorama's angular resolution, its
//! edges are filtered around the detected skyline, and a vector
//! cross-correlation against the panorama skyline edges yields the top-K
//! global candidates. A Hausdorff comparison of the two skylines picks one
//! candidate, after which every visible peak is refined locally.

mod camera;
mod candidates;
mod local;
mod metrics;
mod refine;
mod vcc;

use serde::{Deserialize, Serialize};

pub use camera::{
    compute_fov, fov_deg, scale_photo_to_panorama, scaled_size, CameraMeta, SensorDb, FALLBACK_SENSOR_WIDTH_MM,
    MIN_SCALED_WIDTH_PX,
};
pub use candidates::{displacement_distance, local_maxima, sort_candidates, top_k_candidates, Candidate, CandidateSet};
pub use local::{local_align, LocalAlignment, LocalParams, LocalPeak};
pub use metrics::{angular_error, best_displacement, d_x, d_y, peak_error};
pub use refine::{hausdorff_skyline, refine, refine_index, refine_scores};
pub use vcc::{edge_vector, vcc_correlate, CorrelationMap, Displacement};

use crate::dem::Panorama;
use crate::error::{Error, Result};
use crate::imaging::{
    detect_skyline, extract_edges, panorama_skyline_edges, weight_edges_below_skyline, BitMask, EdgeMap, Raster,
    SkylineParams, SkylinePath,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    /// Number of global candidates kept.
    pub k: usize,
    pub nms_radius_px: f64,
    /// Weight of the VCC rank in the refinement score.
    pub rank_weight: f64,
    /// Attenuation length of edges below the photo skyline.
    pub decay_deg: f64,
    /// Dilation applied to the panorama skyline edges.
    pub dilation_radius_px: usize,
    pub skyline: SkylineParams,
    pub local: LocalParams,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            k: 3,
            nms_radius_px: 10.0,
            rank_weight: 0.5,
            decay_deg: 1.0,
            dilation_radius_px: 2,
            skyline: SkylineParams::default(),
            local: LocalParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Refined global displacement (one of `candidates`).
    pub global: Displacement,
    /// Zero-based rank of the refined choice among the candidates.
    pub refined_rank: usize,
    pub candidates: CandidateSet,
    #[serde(with = "crate::serde_float::inf_as_null")]
    pub hausdorff_deg: Vec<f64>,
    pub peaks: Vec<LocalPeak>,
    pub dropped_peaks: Vec<String>,
    /// Size of the photo at panorama scale.
    pub photo_width: usize,
    pub photo_height: usize,
    pub panorama_width: usize,
    pub photo_skyline: SkylinePath,
}

/// Aligns a photo edge map that is already at panorama scale.
pub fn align_edges(photo_edges: &EdgeMap, pan: &Panorama, params: &AlignParams) -> Result<AlignmentResult> {
    let sky = detect_skyline(photo_edges, &params.skyline);
    let weighted = weight_edges_below_skyline(photo_edges, &sky, params.decay_deg, pan.deg_per_px)?;
    let pan_edges = panorama_skyline_edges(pan, params.dilation_radius_px);
    let map = vcc_correlate(&weighted, &pan_edges)?;
    let candidates = top_k_candidates(&map, params.k, params.nms_radius_px);
    let (rank, global, hausdorff) = refine(
        &candidates,
        &sky,
        &pan.skyline,
        pan.height_px,
        pan.deg_per_px,
        params.rank_weight,
    )
    .ok_or_else(|| Error::Degenerate("correlation map has no local maximum".into()))?;
    let local = local_align(&weighted, &pan_edges, global, &pan.peaks, &params.local);
    Ok(AlignmentResult {
        global,
        refined_rank: rank,
        candidates,
        hausdorff_deg: hausdorff,
        peaks: local.peaks,
        dropped_peaks: local.dropped,
        photo_width: photo_edges.width,
        photo_height: photo_edges.height,
        panorama_width: pan.width_px,
        photo_skyline: sky,
    })
}

/// Full alignment of a photograph with the given horizontal field of view.
pub fn align_photo(photo: &Raster, fov: f64, pan: &Panorama, params: &AlignParams) -> Result<AlignmentResult> {
    let scaled = scale_photo_to_panorama(photo, fov, pan.width_px)?;
    align_edges(&extract_edges(&scaled), pan, params)
}

/// Terrain information transferred from the panorama onto the aligned photo
/// (panorama-scale photo coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotoTerrain {
    pub width: usize,
    pub height: usize,
    /// Below the photo skyline and on rendered terrain.
    pub mountain: BitMask,
    /// Terrain altitude per pixel, NaN off-terrain.
    pub altitude_m: Vec<f32>,
}

pub fn photo_terrain(result: &AlignmentResult, pan: &Panorama) -> PhotoTerrain {
    let (w, h) = (result.photo_width, result.photo_height);
    let mut altitude_m = vec![f32::NAN; w * h];
    let mut mountain = BitMask::new(w, h, false);
    for y in 0..h {
        let py = y as i64 + result.global.dy;
        if py < 0 || py >= pan.height_px as i64 {
            continue;
        }
        for x in 0..w {
            let px = (x as i64 + result.global.dx).rem_euclid(pan.width_px as i64) as usize;
            let alt = pan.altitude_at(px, py as usize);
            if alt.is_nan() {
                continue;
            }
            altitude_m[y * w + x] = alt;
            let below_sky = result.photo_skyline.row(x).is_some_and(|r| y >= r);
            mountain.set(x, y, below_sky);
        }
    }
    PhotoTerrain {
        width: w,
        height: h,
        mountain,
        altitude_m,
    }
}
