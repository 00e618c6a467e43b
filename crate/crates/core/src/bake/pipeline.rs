//! Whole-scene baking: finest blocks from the field, coarser LODs by merging,
//! and export of everything with its manifest.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::grids::{quantize_grids, sample_field_to_grids, BakeConfig};
use super::io::{export_block, export_shader, import_block, load_shaders, shader_file};
use super::lod::generate_level;
use super::marking::{bake_occupancy, training_rays};
use super::source::{AnalyticBlock, FieldSource};
use crate::geometry::Ray;
use crate::render::ShadedBlock;
use crate::scene::{BlockAssets, BlockId, BlockLayout, DeferredShaderWeights, SceneManifest};
use crate::synth::{build_field, orbit_path, SceneSpec, SyntheticField};
use crate::{Error, Result};

/// Bake settings stored beside the manifest so coarser LODs can be added later.
pub const BAKE_CONFIG_FILE: &str = "bake.json";

/// Baked blocks of every LOD, in memory.
#[derive(Clone, Debug)]
pub struct BakedScene {
    pub layout: BlockLayout,
    pub config: BakeConfig,
    pub background: [f64; 3],
    /// Index `l - 1` holds the shading weights of LOD `l`.
    pub shaders: Vec<Arc<DeferredShaderWeights>>,
    /// Index `l - 1` holds the blocks of LOD `l` in `(iy, ix)` order.
    pub levels: Vec<Vec<BlockAssets>>,
}

impl BakedScene {
    pub fn lod_count(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn block(&self, id: &BlockId) -> Option<&BlockAssets> {
        self.levels
            .get(id.lod as usize - 1)?
            .iter()
            .find(|b| b.id() == *id)
    }

    /// Blocks of one LOD bound to that LOD's shader.
    pub fn render_blocks(&self, lod: u32) -> Vec<ShadedBlock> {
        let shader = &self.shaders[lod as usize - 1];
        self.levels[lod as usize - 1]
            .iter()
            .map(|b| ShadedBlock {
                assets: Arc::new(b.clone()),
                shader: shader.clone(),
            })
            .collect()
    }

    /// Quantized bytes of one LOD.
    pub fn lod_bytes(&self, lod: u32) -> usize {
        self.levels[lod as usize - 1].iter().map(BlockAssets::byte_size).sum()
    }
}

/// Bakes one finest-LOD block.
pub fn bake_block<F: FieldSource + ?Sized>(
    src: &F,
    layout: &BlockLayout,
    id: BlockId,
    cfg: &BakeConfig,
    rays: &[Ray],
) -> Result<BlockAssets> {
    let frame = cfg.frame(layout, id, src.is_unbounded(&id));
    let grids = sample_field_to_grids(src, &frame, cfg.plane_dims(id.lod), cfg.plane_share)?;
    let occupancy = bake_occupancy(src, &frame, cfg, rays)?;
    quantize_grids(&grids, &cfg.quantization, occupancy, cfg.pyramid_levels)
}

/// Bakes a field into `lods` levels. Shaders come from `shader_for(lod)`.
pub fn bake_field<F: FieldSource + ?Sized>(
    src: &F,
    layout: &BlockLayout,
    cfg: &BakeConfig,
    rays: &[Ray],
    lods: u32,
    shader_for: impl Fn(u32) -> DeferredShaderWeights,
) -> Result<BakedScene> {
    let mut layout = layout.clone();
    layout.validate()?;
    if lods == 0 || lods > layout.lod_count {
        return Err(Error::InvalidConfig(format!(
            "cannot bake {lods} LODs of a {}-LOD layout",
            layout.lod_count
        )));
    }
    layout.lod_count = lods;
    cfg.validate(lods)?;
    if rays.is_empty() {
        return Err(Error::EmptyRaySet);
    }
    let ids: Vec<BlockId> = layout.blocks(1).collect();
    let finest = ids
        .par_iter()
        .map(|id| bake_block(src, &layout, *id, cfg, rays))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = vec![finest];
    for _ in 1..lods {
        let next = generate_level(src, levels.last().unwrap(), &layout, cfg)?;
        levels.push(next);
    }
    Ok(BakedScene {
        config: cfg.clone(),
        background: crate::scene::DEFAULT_BACKGROUND,
        shaders: (1..=lods).map(|l| Arc::new(shader_for(l))).collect(),
        levels,
        layout,
    })
}

/// Training rays of a synthetic scene under a ray budget.
pub fn scene_rays(spec: &SceneSpec, budget: usize) -> Result<Vec<Ray>> {
    Ok(training_rays(&orbit_path(&spec.camera_path)?, budget))
}

/// Synth spec to baked scene. `lods` defaults to the layout's LOD count.
pub fn bake_scene(spec: &SceneSpec, cfg: &BakeConfig, lods: Option<u32>) -> Result<BakedScene> {
    let field = build_field(spec)?;
    let rays = scene_rays(spec, cfg.ray_budget)?;
    let mut scene = bake_field(
        &field,
        &spec.layout,
        cfg,
        &rays,
        lods.unwrap_or(spec.layout.lod_count),
        |l| spec.shader(l),
    )?;
    scene.background = spec.background;
    Ok(scene)
}

/// Adds coarser LODs to a scene until it has `lods` levels.
pub fn extend_lods<F: FieldSource + ?Sized>(
    scene: &mut BakedScene,
    src: &F,
    full_layout: &BlockLayout,
    lods: u32,
    shader_for: impl Fn(u32) -> DeferredShaderWeights,
) -> Result<()> {
    if lods > full_layout.lod_count {
        return Err(Error::NoCoarserLod(full_layout.lod_count));
    }
    if lods <= scene.lod_count() {
        return Ok(());
    }
    scene.config.validate(lods)?;
    let mut layout = full_layout.clone();
    layout.lod_count = lods;
    while scene.lod_count() < lods {
        let next = generate_level(src, scene.levels.last().unwrap(), &layout, &scene.config)?;
        scene.levels.push(next);
        scene.shaders.push(Arc::new(shader_for(scene.lod_count())));
    }
    scene.layout = layout;
    Ok(())
}

/// Writes every block, every shader and the manifest under `root`.
pub fn export_scene(scene: &BakedScene, root: &Path) -> Result<SceneManifest> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = SceneManifest::new(
        scene.layout.clone(),
        scene.config.quantization.clone(),
        scene.config.pyramid_levels,
    );
    manifest.background = scene.background;
    for (i, w) in scene.shaders.iter().enumerate() {
        manifest.shaders.push(export_shader(root, i as u32 + 1, w)?);
    }
    for level in &scene.levels {
        for b in level {
            manifest.blocks.push(export_block(root, b)?);
        }
    }
    manifest.validate_structure()?;
    let cfg_path = root.join(BAKE_CONFIG_FILE);
    let cfg = serde_json::to_string_pretty(&scene.config)?;
    std::fs::write(&cfg_path, cfg + "\n").map_err(|e| Error::io(&cfg_path, e))?;
    manifest.save(root)?;
    Ok(manifest)
}

/// Reads an exported scene back into memory, verifying every file.
pub fn load_scene(root: &Path) -> Result<(SceneManifest, BakedScene)> {
    let manifest = SceneManifest::load(root)?;
    manifest.validate_structure()?;
    let cfg_path = root.join(BAKE_CONFIG_FILE);
    let raw = std::fs::read(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let config: BakeConfig = serde_json::from_slice(&raw)?;
    let shaders = load_shaders(root, &manifest)?;
    let layout = manifest.layout.clone();
    let mut scene = BakedScene {
        config,
        background: manifest.background,
        shaders: Vec::new(),
        levels: Vec::new(),
        layout: layout.clone(),
    };
    for lod in 1..=layout.lod_count {
        let name = shader_file(lod);
        let shader = shaders
            .get(&name)
            .cloned()
            .ok_or_else(|| Error::asset(root.join(&name), "shader not in manifest"))?;
        scene.shaders.push(shader);
        let ids: Vec<BlockId> = layout.blocks(lod).collect();
        let level = ids
            .par_iter()
            .map(|id| import_block(root, &manifest, id))
            .collect::<Result<Vec<_>>>()?;
        scene.levels.push(level);
    }
    Ok((manifest, scene))
}

/// Analytic counterparts of one LOD's blocks: same frames and shaders, field
/// queried directly.
pub fn analytic_blocks<'a>(
    scene: &BakedScene,
    field: &'a SyntheticField,
    lod: u32,
    with_occupancy: bool,
) -> Vec<AnalyticBlock<&'a SyntheticField>> {
    let shader = &scene.shaders[lod as usize - 1];
    scene.levels[lod as usize - 1]
        .iter()
        .map(|b| AnalyticBlock {
            field,
            frame: b.frame.clone(),
            shader: shader.clone(),
            occupancy: with_occupancy.then(|| b.occupancy.clone()),
        })
        .collect()
}
