use std::path::PathBuf;
use std::sync::Arc;

use blockfield_core::bake::{AnalyticBlock, BakeConfig, FieldSource};
use blockfield_core::render::{render_frame, Camera, RenderOptions};
use blockfield_core::synth::{build_field, orbit_path, presets, SceneSpec};
use clap::{ArgGroup, Args};
use glam::DVec3;
use serde_json::json;

use crate::{Failure, OutputArgs, Report};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["spec", "preset"])))]
pub struct SynthArgs {
    /// Existing scene spec to validate and preview.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Built-in scene: city, terrain, spheres, sparse or fog.
    #[arg(long)]
    pub preset: Option<String>,
    /// Finest-LOD blocks per side for presets.
    #[arg(long, default_value_t = 2)]
    pub grid: u32,
    /// LOD count for presets.
    #[arg(long, default_value_t = 2)]
    pub lods: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the scene spec.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PNG preview rendered directly from the analytic field.
    #[arg(long)]
    pub preview: Option<PathBuf>,
    /// Write every orbit pose as `pose_NNN.json` into this directory.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Preview pose; defaults to the first pose of the spec's orbit.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub width: u32,
    #[arg(long, default_value_t = 128)]
    pub height: u32,
    /// Grid resolution that sets the preview's marching step.
    #[arg(long, default_value_t = 64)]
    pub preview_res: u32,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

pub fn load_spec(path: &std::path::Path) -> Result<SceneSpec, Failure> {
    let spec = SceneSpec::load(path)?;
    spec.validate()?;
    Ok(spec)
}

/// Camera from a pose file, or pose `k` of the spec's orbit.
pub fn pose(spec: &SceneSpec, file: Option<&std::path::Path>, k: usize) -> Result<Camera, Failure> {
    match file {
        Some(p) => Ok(Camera::load(p)?),
        None => {
            let cams = orbit_path(&spec.camera_path)?;
            Ok(cams[k % cams.len()].clone())
        }
    }
}

pub fn run(args: &SynthArgs) -> Result<Report, Failure> {
    let spec = match (&args.spec, &args.preset) {
        (Some(p), _) => load_spec(p)?,
        (None, Some(name)) => presets::by_name(name, args.grid, args.lods, args.seed).ok_or_else(|| {
            Failure::Usage(format!("unknown preset {name}; expected one of {:?}", presets::NAMES))
        })?,
        (None, None) => return Err(Failure::Usage("--spec or --preset is required".into())),
    };
    spec.validate()?;
    if let Some(out) = &args.out {
        std::fs::write(out, spec.to_json())?;
    }
    let mut pose_files = Vec::new();
    if let Some(dir) = &args.poses {
        std::fs::create_dir_all(dir)?;
        for (k, cam) in orbit_path(&spec.camera_path)?.iter().enumerate() {
            let path = dir.join(format!("pose_{k:03}.json"));
            std::fs::write(&path, serde_json::to_vec_pretty(&cam.with_resolution(args.width, args.height))?)?;
            pose_files.push(path);
        }
    }
    if let Some(png) = &args.preview {
        let field = build_field(&spec)?;
        let cfg = BakeConfig {
            voxel_res: args.preview_res,
            ..BakeConfig::default()
        };
        let shader = Arc::new(spec.shader(1));
        let blocks: Vec<_> = spec
            .layout
            .blocks(1)
            .map(|id| AnalyticBlock::new(&field, cfg.frame(&spec.layout, id, field.is_unbounded(&id)), shader.clone()))
            .collect();
        let cam = pose(&spec, args.camera.as_deref(), 0)?.with_resolution(args.width, args.height);
        let opts = RenderOptions {
            background: DVec3::from_array(spec.background),
            ..RenderOptions::default()
        };
        render_frame(&cam, &blocks, &opts)?.write_png(png)?;
    }
    let b = spec.bounds();
    let json = json!({
        "name": spec.name,
        "seed": spec.seed,
        "primitives": spec.primitives.len(),
        "layout": spec.layout,
        "bounds": { "min": b.min.to_array(), "max": b.max.to_array() },
        "spec": args.out,
        "preview": args.preview,
        "poses": pose_files,
    });
    let text = format!(
        "scene {}: {} primitives over {}x{} blocks, {} LODs",
        spec.name,
        spec.primitives.len(),
        spec.layout.grid_dims[0],
        spec.layout.grid_dims[1],
        spec.layout.lod_count
    );
    Ok(Report::ok(json, text))
}
