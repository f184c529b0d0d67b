//! Raster primitives shared by the photo and webcam pipelines.

mod edges;
mod morphology;
mod raster;
mod resample;
mod skyline;

pub use edges::{extract_edges, to_gray, LUMA_WEIGHTS};
pub use morphology::{dilate_edges, dilate_edges_circular, disk_offsets};
pub use raster::{fold_direction, BitMask, EdgeMap, Raster};
pub use resample::{resample, resize, resize_mask, resize_nearest};
pub use skyline::{
    detect_skyline, panorama_skyline_edges, skyline_node_cost, skyline_path_cost, upper_envelope,
    weight_edges_below_skyline, SkylineParams, SkylinePath,
};
