//! Block-partitioned baked radiance fields.
//!
//! Scenes are split into a uniform ground-plane grid of blocks with a 2x2
//! merge hierarchy of coarser levels of detail. Each block is baked into a
//! quantized sparse voxel atlas, three feature planes and an occupancy
//! pyramid. Rendering marches each block independently and composites the
//! per-block results front to back.

pub mod bake;
mod error;
pub mod geometry;
pub mod render;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
