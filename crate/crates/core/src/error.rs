use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing DEM tile {0}")]
    MissingTile(String),
    #[error("malformed DEM tile {name}: expected {expected} bytes, got {actual}")]
    MalformedTile {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("point ({lat:.6}, {lon:.6}) is outside the DEM bounds")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
