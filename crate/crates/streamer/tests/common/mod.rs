#![allow(dead_code)]

use blockfield_core::render::Camera;
use blockfield_core::scene::{BlockEntry, BlockId, BlockLayout, FileEntry, QuantizationSpec, SceneManifest};
use blockfield_streamer::SceneIndex;
use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn layout(grid: u32, lods: u32) -> BlockLayout {
    BlockLayout {
        origin: [-1.0, 2.0],
        block_size: 1.0,
        grid_dims: [grid, grid],
        z_range: [0.0, 1.5],
        lod_count: lods,
    }
}

/// Manifest with random finest-level heights (parents take the max of their
/// children) and random block sizes.
pub fn manifest(layout: &BlockLayout, rng: &mut ChaCha8Rng) -> SceneManifest {
    let mut m = SceneManifest::new(layout.clone(), QuantizationSpec::default(), 3);
    let mut z: HashMap<BlockId, f64> = HashMap::new();
    for lod in 1..=layout.lod_count {
        for id in layout.blocks(lod) {
            let z_top = if lod == 1 {
                rng.random_range(layout.z_range[0]..=layout.z_range[1])
            } else {
                id.children().iter().map(|c| z[c]).fold(layout.z_range[0], f64::max)
            };
            z.insert(id, z_top);
            m.blocks.push(BlockEntry {
                lod: id.lod,
                ix: id.ix,
                iy: id.iy,
                dir: id.dir_name(),
                voxel_dims: [8, 8, 8],
                plane_dims: [[8, 8]; 3],
                unbounded: false,
                atlas_macroblocks: 0,
                z_top,
                shader: format!("lod{lod}/shader.json"),
                files: vec![FileEntry {
                    name: "occupancy.bin".into(),
                    bytes: rng.random_range(1000..5000),
                    sha256: String::new(),
                }],
            });
        }
    }
    m
}

pub fn index(grid: u32, lods: u32, seed: u64) -> SceneIndex {
    let mut r = rng(seed);
    SceneIndex::from_manifest(&manifest(&layout(grid, lods), &mut r)).unwrap()
}

pub fn random_camera(rng: &mut ChaCha8Rng, layout: &BlockLayout) -> Camera {
    let d = layout.domain();
    let span = d.max - d.min;
    let eye = DVec3::new(
        rng.random_range(d.min.x - 0.5 * span.x..d.max.x + 0.5 * span.x),
        rng.random_range(d.min.y - 0.5 * span.y..d.max.y + 0.5 * span.y),
        rng.random_range(0.1..6.0),
    );
    let target = DVec3::new(
        rng.random_range(d.min.x - span.x..d.max.x + span.x),
        rng.random_range(d.min.y - span.y..d.max.y + span.y),
        rng.random_range(-1.0..1.0),
    );
    let target = if (target - eye).truncate().length() < 1e-3 { target + DVec3::X } else { target };
    Camera::look_at(eye, target, DVec3::Z, 64, 48, rng.random_range(30.0..100.0))
}
