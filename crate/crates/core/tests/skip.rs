//! Occupancy-driven empty-space skipping against exhaustive marching.

mod common;

use blockfield_core::bake::{bake_occupancy, training_rays, AnalyticBlock};
use blockfield_core::render::*;
use blockfield_core::synth::{build_field, orbit_path, presets};
use std::sync::Arc;

fn with_skip(mode: SkipMode) -> RenderOptions {
    RenderOptions {
        march: MarchOptions {
            skip: mode,
            ..MarchOptions::default()
        },
        ..RenderOptions::default()
    }
}

#[test]
fn skipping_matches_exhaustive_on_orbit_poses() {
    for name in ["city", "terrain", "sparse"] {
        let spec = presets::by_name(name, 2, 1, 21).unwrap();
        let cfg = blockfield_core::bake::BakeConfig {
            ray_budget: 24 * 96 * 96,
            ..common::small_config()
        };
        let scene = common::bake(&spec, &cfg);
        let blocks = scene.render_blocks(1);
        let cams = orbit_path(&spec.camera_path).unwrap();
        for cam in [&cams[0], &cams[9]] {
            let cam = cam.with_resolution(48, 48);
            let fast = render_frame(&cam, &blocks, &with_skip(SkipMode::Hierarchical)).unwrap();
            let level0 = render_frame(&cam, &blocks, &with_skip(SkipMode::Level0)).unwrap();
            let slow = render_frame(&cam, &blocks, &with_skip(SkipMode::Exhaustive)).unwrap();
            assert_eq!(fast, level0, "{name}");
            let (mean, max) = abs_diff(&fast, &slow).unwrap();
            assert!(mean <= 2.0 / 255.0 && max <= 8.0 / 255.0, "{name}: {mean} {max}");
        }
    }
}

/// Marching the analytic field with occupancy from training rays keeps every
/// pixel those rays saw within tolerance of the unskipped analytic render.
#[test]
fn analytic_occupancy_is_sound_on_training_rays() {
    let spec = presets::spheres(1, 1, 2);
    let field = build_field(&spec).unwrap();
    let cfg = common::small_config();
    let frame = cfg.frame(&spec.layout, blockfield_core::scene::BlockId::new(1, 0, 0), false);
    let cams = orbit_path(&spec.camera_path).unwrap();
    let cams: Vec<_> = cams.iter().map(|c| c.with_resolution(32, 32)).collect();
    let rays = training_rays(&cams, usize::MAX);
    let occ = bake_occupancy(&field, &frame, &cfg, &rays).unwrap();
    let shader = Arc::new(spec.shader(1));
    let plain = AnalyticBlock::new(&field, frame.clone(), shader.clone());
    let mut skipping = AnalyticBlock::new(&field, frame, shader);
    skipping.occupancy =
        Some(blockfield_core::scene::OccupancyPyramid::build(occ, cfg.pyramid_levels).unwrap());
    let opts = with_skip(SkipMode::Hierarchical);
    let mut skipped = 0;
    for ray in &rays {
        let a = render_ray(ray, &[&skipping], &opts);
        let b = render_ray(ray, &[&plain], &opts);
        assert!((a.color - b.color).abs().max_element() <= 8.0 / 255.0);
        skipped += a.skipped;
    }
    assert!(skipped > 0);
}
