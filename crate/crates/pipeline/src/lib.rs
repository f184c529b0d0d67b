//! Photo and webcam snow-cover pipeline: ingestion, orchestration, the
//! on-disk store, evaluation and the annotation HTTP service.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod exif;
pub mod imageio;
pub mod ingest;
pub mod photo;
pub mod service;
pub mod store;
pub mod webcam;

pub use config::JobConfig;
pub use error::{PipelineError, Result};
pub use store::Store;
