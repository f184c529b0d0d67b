//! Snow cover estimation from mountain photographs and webcam imagery.
//!
//! The crate is organised along the processing chain:
//!
//! 1. [`dem`] loads elevation tiles and renders 360° terrain panoramas.
//! 2. [`imaging`] holds raster types and edge / skyline primitives.
//! 3. [`alignment`] registers a photograph against a panorama (global VCC
//!    search, Hausdorff refinement, per-peak local alignment).
//! 4. [`webcam`] screens frames by skyline visibility and builds daily
//!    median images.
//! 5. [`classify`] labels pixels of the mountain area as snow / no snow.
//! 6. [`series`] turns daily masks into gap-free, smoothed snow-line series.
//! 7. [`evaluation`] computes ROC curves, alignment success rates and
//!    classification scores.

// `!(a < b)` is the range check of choice: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod alignment;
pub mod classify;
pub mod dem;
pub mod error;
pub mod evaluation;
pub mod imaging;
mod serde_float;
pub mod series;
pub mod synthetic;
pub mod webcam;

pub use error::{Error, Result};
