//! Conversion of a ground-truth field into quantized block assets: grid
//! sampling, occupancy marking, atlas packing, LOD merging and file export.

pub mod grids;
pub mod io;
pub mod lod;
pub mod marking;
pub mod pipeline;
pub mod source;

pub use grids::{quantize_grids, sample_field_to_grids, BakeConfig, DenseGrids};
pub use io::{export_block, import_block, load_blocks, load_lod, load_shaders, read_checked};
pub use lod::{generate_level, generate_lod, merge_occupancy};
pub use marking::{bake_occupancy, training_rays};
pub use pipeline::{
    analytic_blocks, bake_block, bake_field, bake_scene, export_scene, extend_lods, load_scene,
    scene_rays, BakedScene, BAKE_CONFIG_FILE,
};
pub use source::{AnalyticBlock, ConstantField, FieldSource};
