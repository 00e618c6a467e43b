//! Export and import of baked scenes.

mod common;

use blockfield_core::bake::{export_scene, import_block, load_lod, read_checked, BakedScene};
use blockfield_core::render::*;
use blockfield_core::scene::SceneManifest;
use blockfield_core::synth::{orbit_path, presets};
use blockfield_core::Error;
use std::path::Path;

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn baked(name: &str) -> (blockfield_core::synth::SceneSpec, BakedScene) {
    let spec = presets::by_name(name, 2, 2, 11).unwrap();
    let scene = common::bake(&spec, &common::small_config());
    (spec, scene)
}

#[test]
fn import_reproduces_blocks_and_renders() {
    for name in ["city", "sparse"] {
        let (spec, scene) = baked(name);
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_scene(&scene, dir.path()).unwrap();
        manifest.validate_files(dir.path()).unwrap();
        let reloaded = SceneManifest::load(dir.path()).unwrap();
        assert_eq!(reloaded, manifest);
        for level in &scene.levels {
            for b in level {
                let back = import_block(dir.path(), &manifest, &b.id()).unwrap();
                assert_eq!(&back, b);
            }
        }
        let cam = orbit_path(&spec.camera_path).unwrap()[2].with_resolution(40, 40);
        for lod in 1..=2 {
            let mem = render_frame(&cam, &scene.render_blocks(lod), &RenderOptions::default()).unwrap();
            let disk = render_frame(&cam, &load_lod(dir.path(), &manifest, lod).unwrap(), &RenderOptions::default()).unwrap();
            assert_eq!(mem.to_pfm(), disk.to_pfm());
        }
    }
}

#[test]
fn two_exports_are_identical() {
    let (_, scene) = baked("spheres");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_scene(&scene, a.path()).unwrap();
    export_scene(&scene, b.path()).unwrap();
    let ta = tree_bytes(a.path());
    assert!(ta.len() > 10);
    assert_eq!(ta, tree_bytes(b.path()));
}

#[test]
fn empty_block_has_floor_z_top() {
    let spec = presets::base_spec("empty", 2, 1, 1.0);
    let scene = common::bake(&spec, &common::small_config());
    for b in &scene.levels[0] {
        assert_eq!(b.occupancy.level0().count(), 0);
        assert_eq!(b.z_top(), b.frame.bounds.min.z);
        assert_eq!(b.atlas.macroblock_count(), 0);
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_scene(&scene, dir.path()).unwrap();
    for e in &manifest.blocks {
        assert_eq!(e.z_top, spec.layout.z_range[0]);
    }
    let back = load_lod(dir.path(), &manifest, 1).unwrap();
    assert_eq!(back.len(), 4);
}

#[test]
fn corrupted_file_is_rejected() {
    let (_, scene) = baked("city");
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_scene(&scene, dir.path()).unwrap();
    let entry = &manifest.blocks[0];
    let file = &entry.files[0];
    let path = dir.path().join(&entry.dir).join(&file.name);
    let mut bytes = std::fs::read(&path).unwrap();
    assert!(read_checked(&path, file).is_ok());
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_checked(&path, file), Err(Error::Asset { .. })));
    assert!(import_block(dir.path(), &manifest, &entry.id()).is_err());
    assert!(manifest.validate_files(dir.path()).is_ok());

    bytes.truncate(mid);
    std::fs::write(&path, &bytes).unwrap();
    assert!(import_block(dir.path(), &manifest, &entry.id()).is_err());
    assert!(manifest.validate_files(dir.path()).is_err());
}

#[test]
fn whole_scene_loads_back() {
    let (_, scene) = baked("terrain");
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_scene(&scene, dir.path()).unwrap();
    let (m, back) = blockfield_core::bake::load_scene(dir.path()).unwrap();
    assert_eq!(m, manifest);
    assert_eq!(back.levels, scene.levels);
    assert_eq!(back.config, scene.config);
    assert_eq!(back.layout, scene.layout);
    assert_eq!(back.background, scene.background);
    for (a, b) in back.shaders.iter().zip(&scene.shaders) {
        assert_eq!(**a, **b);
    }
}
