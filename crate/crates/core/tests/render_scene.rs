//! Whole-frame rendering of small synthetic scenes.

mod common;

use blockfield_core::bake::analytic_blocks;
use blockfield_core::render::*;
use blockfield_core::synth::{build_field, presets, Primitive, Shape};
use glam::DVec3;

#[test]
fn single_pixel_miss_is_background() {
    let spec = presets::sparse(1, 1, 0);
    let scene = common::bake(&spec, &common::small_config());
    let blocks = scene.render_blocks(1);
    let cam = Camera::look_at(
        DVec3::new(0.5, 0.5, 5.0),
        DVec3::new(0.5, 0.5, 10.0),
        DVec3::X,
        1,
        1,
        30.0,
    );
    let opts = RenderOptions::default();
    let fb = render_frame(&cam, &blocks, &opts).unwrap();
    assert_eq!(fb.pixel(0, 0), [0.5f32; 3]);
    assert_eq!(fb.alpha[0], 0.0);
    let none: Vec<ShadedBlock> = Vec::new();
    let fb = render_frame(&cam, &none, &opts).unwrap();
    assert_eq!(fb.pixel(0, 0), [0.5f32; 3]);
}

#[test]
fn zero_area_is_rejected() {
    let cam = Camera::look_at(DVec3::ZERO, DVec3::X, DVec3::Z, 0, 4, 40.0);
    let none: Vec<ShadedBlock> = Vec::new();
    assert!(render_frame(&cam, &none, &RenderOptions::default()).is_err());
}

#[test]
fn solid_cube_covers_its_projection() {
    let albedo = [0.8, 0.3, 0.2];
    let mut spec = presets::base_spec("cube", 1, 1, 1.0);
    let (lo, hi) = (DVec3::new(0.3, 0.3, 0.3), DVec3::new(0.7, 0.7, 0.7));
    spec.primitives.push(Primitive {
        shape: Shape::Box { min: lo, max: hi },
        density: 400.0,
        albedo,
        feature: [0.0; 4],
    });
    let cfg = blockfield_core::bake::BakeConfig {
        voxel_res: 32,
        triplane_res: 16,
        ..common::small_config()
    };
    let scene = common::bake(&spec, &cfg);
    let blocks = scene.render_blocks(1);
    let eye = DVec3::new(0.5, -1.5, 0.9);
    let cam = Camera::look_at(eye, DVec3::new(0.5, 0.5, 0.5), DVec3::Z, 48, 48, 50.0);
    let fb = render_frame(&cam, &blocks, &RenderOptions::default()).unwrap();
    let margin = 0.06;
    let inner = blockfield_core::geometry::Aabb::new(lo + margin, hi - margin);
    let outer = blockfield_core::geometry::Aabb::new(lo - margin, hi + margin);
    let (mut hit, mut miss) = (0, 0);
    for y in 0..48 {
        for x in 0..48 {
            let ray = cam.ray(x, y);
            let px = fb.pixel(x, y);
            if inner.intersect(&ray).is_some() {
                for c in 0..3 {
                    assert!((f64::from(px[c]) - albedo[c]).abs() < 0.03, "pixel ({x}, {y}) = {px:?}");
                }
                hit += 1;
            } else if outer.intersect(&ray).is_none() {
                assert!(px.iter().all(|v| (v - 0.5).abs() < 1e-3), "pixel ({x}, {y}) = {px:?}");
                miss += 1;
            }
        }
    }
    assert!(hit > 50 && miss > 50);
}

#[test]
fn frames_are_deterministic() {
    let spec = presets::terrain(2, 1, 4);
    let scene = common::bake(&spec, &common::small_config());
    let blocks = scene.render_blocks(1);
    let cam = blockfield_core::synth::orbit_path(&spec.camera_path).unwrap()[3].with_resolution(40, 30);
    let opts = RenderOptions::default();
    let a = render_frame(&cam, &blocks, &opts).unwrap();
    let b = render_frame(&cam, &blocks, &opts).unwrap();
    assert_eq!(a.to_pfm(), b.to_pfm());
    assert_eq!(a.alpha, b.alpha);
    assert!(a.is_valid());
}

#[test]
fn opaque_near_block_hides_far_block() {
    let mut spec = presets::base_spec("wall", 2, 1, 1.0);
    spec.primitives.push(Primitive {
        shape: Shape::Box {
            min: DVec3::new(0.4, 0.0, 0.0),
            max: DVec3::new(0.6, 2.0, 1.0),
        },
        density: 300.0,
        albedo: [0.2, 0.6, 0.3],
        feature: [0.0; 4],
    });
    spec.primitives.push(Primitive {
        shape: Shape::Sphere {
            center: DVec3::new(1.5, 0.5, 0.5),
            radius: 0.3,
        },
        density: 300.0,
        albedo: [0.9, 0.1, 0.1],
        feature: [0.0; 4],
    });
    let scene = common::bake(&spec, &common::small_config());
    let all = scene.render_blocks(1);
    let near: Vec<_> = all.iter().filter(|b| b.assets.id().ix == 0).cloned().collect();
    let cam = Camera::look_at(
        DVec3::new(-1.0, 0.5, 0.5),
        DVec3::new(1.5, 0.5, 0.5),
        DVec3::Z,
        32,
        32,
        30.0,
    );
    let opts = RenderOptions::default();
    let full = render_frame(&cam, &all, &opts).unwrap();
    let partial = render_frame(&cam, &near, &opts).unwrap();
    assert_eq!(full, partial);
}

#[test]
fn baked_render_tracks_the_field() {
    let spec = presets::city(2, 1, 8);
    let cfg = blockfield_core::bake::BakeConfig {
        voxel_res: 32,
        ..common::small_config()
    };
    let scene = common::bake(&spec, &cfg);
    let field = build_field(&spec).unwrap();
    let baked = scene.render_blocks(1);
    let truth = analytic_blocks(&scene, &field, 1, false);
    let cam = blockfield_core::synth::orbit_path(&spec.camera_path).unwrap()[0].with_resolution(48, 48);
    let opts = RenderOptions::default();
    let a = render_frame(&cam, &baked, &opts).unwrap();
    let b = render_frame(&cam, &truth, &opts).unwrap();
    assert!(psnr(&a, &b).unwrap() >= 30.0);
}
