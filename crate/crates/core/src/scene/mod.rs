//! Scene partition, coordinate contraction, quantized attribute storage and
//! point queries shared by the baker, the renderer and the streamer.

pub mod assets;
pub mod atlas;
pub mod contract;
pub mod layout;
pub mod manifest;
pub mod occupancy;
pub mod quant;
pub mod shader;

pub use assets::{activate, Attributes, BlockAssets, BlockFrame, SIGMA_MAX};
pub use atlas::{pack_atlas, SparseAtlas, TexelPlane, TexelVolume, EMPTY, MACROBLOCK};
pub use contract::{contract, uncontract};
pub use layout::{BlockId, BlockLayout};
pub use manifest::{
    BlockEntry, FileEntry, PolicyParams, SceneManifest, DEFAULT_BACKGROUND, DEFAULT_MEMORY_BUDGET,
    MANIFEST_FILE,
};
pub use occupancy::{maxpool_occupancy, OccupancyGrid, OccupancyPyramid};
pub use quant::QuantizationSpec;
pub use shader::DeferredShaderWeights;

/// Stored channels: density, diffuse rgb, 4 specular features.
pub const CHANNELS: usize = 8;

/// One quantized texel, all channels.
pub type Texel = [u8; CHANNELS];
