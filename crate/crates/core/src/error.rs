use std::path::PathBuf;

use crate::scene::BlockId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the layout domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("field produced a non-finite value at ({x}, {y}, {z})")]
    NonFiniteField { x: f64, y: f64, z: f64 },

    #[error("shader weights are malformed: {0}")]
    InvalidWeights(String),

    #[error("segment opacity {0} lies outside [0, 1]")]
    InvalidOpacity(f64),

    #[error("sample list is not sorted by ray parameter (index {0})")]
    UnsortedSamples(usize),

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("image has zero area")]
    ZeroArea,

    #[error("occupancy marking needs at least one ray")]
    EmptyRaySet,

    #[error("grid resolution {0} is not divisible by {1}")]
    Indivisible(u32, u32),

    #[error("no coarser level of detail exists above LOD {0}")]
    NoCoarserLod(u32),

    #[error("block group for {0} is incomplete")]
    IncompleteGroup(BlockId),

    #[error("block {0} is not part of the manifest")]
    UnknownBlock(BlockId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Asset { path: PathBuf, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn asset(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Asset {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
