#![allow(dead_code)]

use blockfield_core::bake::{bake_scene, BakeConfig, BakedScene};
use blockfield_core::synth::SceneSpec;

pub fn small_config() -> BakeConfig {
    BakeConfig {
        voxel_res: 16,
        triplane_res: 16,
        ray_budget: 24 * 48 * 48,
        ..BakeConfig::default()
    }
}

pub fn bake(spec: &SceneSpec, cfg: &BakeConfig) -> BakedScene {
    bake_scene(spec, cfg, None).expect("bake succeeds")
}
