//! Elevation tiles, peak database and 360° terrain panoramas.

mod geo;
mod grid;
mod panorama;

pub use geo::{
    curvature_drop, destination, elevation_angle_deg, haversine_m, initial_bearing, normalize_lon, GeoPoint,
    EARTH_RADIUS_M, REFRACTION_COEFF,
};
pub use grid::{
    encode_tile, load_dem, load_dem_dir, parse_tile_name, tile_name, DemGrid, TileSource, SRTM3_SIDE,
    SRTM3_SPACING_ARCSEC, VOID,
};
pub use panorama::{read_peaks_csv, render_panorama, Panorama, Peak, ProjectedPeak, RenderOptions};
