use std::path::PathBuf;
use std::time::Instant;

use blockfield_core::bake::{bake_scene, export_scene, extend_lods, load_scene, BakeConfig, BakedScene};
use blockfield_core::scene::SceneManifest;
use blockfield_core::synth::build_field;
use clap::Args;
use serde_json::{json, Value};

use crate::synth::load_spec;
use crate::{Failure, OutputArgs, Report};

#[derive(Debug, Args)]
pub struct BakeArgs {
    /// Scene spec produced by `synth`.
    #[arg(long)]
    pub scene: PathBuf,
    /// Output asset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Bake settings file; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub voxel_res: Option<u32>,
    #[arg(long)]
    pub triplane_res: Option<u32>,
    /// LODs to build; defaults to the layout's LOD count.
    #[arg(long)]
    pub lods: Option<u32>,
    /// Sample weight threshold for occupancy marking.
    #[arg(long)]
    pub tau_w: Option<f64>,
    /// Sample opacity threshold for occupancy marking.
    #[arg(long)]
    pub tau_a: Option<f64>,
    /// Number of training rays marched for occupancy.
    #[arg(long)]
    pub ray_budget: Option<usize>,
    #[arg(long)]
    pub pyramid_levels: Option<u32>,
    /// Fraction of each voxel value moved into the feature planes.
    #[arg(long)]
    pub plane_share: Option<f64>,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

#[derive(Debug, Args)]
pub struct LodArgs {
    /// Asset directory written by `bake`.
    #[arg(long)]
    pub root: PathBuf,
    /// The spec the assets were baked from.
    #[arg(long)]
    pub scene: PathBuf,
    /// Total LOD count after the command.
    #[arg(long)]
    pub lods: u32,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

fn config(args: &BakeArgs) -> Result<BakeConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => BakeConfig::default(),
    };
    let c = &mut cfg;
    if let Some(v) = args.voxel_res {
        c.voxel_res = v;
    }
    if let Some(v) = args.triplane_res {
        c.triplane_res = v;
    }
    if let Some(v) = args.tau_w {
        c.tau_w = v;
    }
    if let Some(v) = args.tau_a {
        c.tau_alpha = v;
    }
    if let Some(v) = args.ray_budget {
        c.ray_budget = v;
    }
    if let Some(v) = args.pyramid_levels {
        c.pyramid_levels = v;
    }
    if let Some(v) = args.plane_share {
        c.plane_share = v;
    }
    Ok(cfg)
}

/// Per-LOD block counts, in-memory and on-disk bytes, and occupancy.
pub fn summary(scene: &BakedScene, manifest: &SceneManifest) -> Value {
    let lods: Vec<Value> = (1..=scene.lod_count())
        .map(|l| {
            let level = &scene.levels[l as usize - 1];
            let cells: usize = level.iter().map(|b| b.occupancy.level0().len()).sum();
            let occupied: usize = level.iter().map(|b| b.occupancy.level0().count()).sum();
            json!({
                "lod": l,
                "blocks": level.len(),
                "memory_bytes": scene.lod_bytes(l),
                "disk_bytes": manifest.lod_bytes(l),
                "occupied_fraction": occupied as f64 / cells.max(1) as f64,
            })
        })
        .collect();
    json!({ "lods": lods })
}

fn summary_text(v: &Value) -> String {
    v["lods"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|l| {
                    format!(
                        "LOD {}: {} blocks, {} bytes in memory, {} on disk, {:.1}% occupied",
                        l["lod"],
                        l["blocks"],
                        l["memory_bytes"],
                        l["disk_bytes"],
                        100.0 * l["occupied_fraction"].as_f64().unwrap_or(0.0)
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_default()
}

pub fn run_bake(args: &BakeArgs) -> Result<Report, Failure> {
    let spec = load_spec(&args.scene)?;
    let cfg = config(args)?;
    let start = Instant::now();
    let scene = bake_scene(&spec, &cfg, args.lods)?;
    let manifest = export_scene(&scene, &args.out)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut json = summary(&scene, &manifest);
    json["root"] = json!(args.out);
    json["seconds"] = json!(seconds);
    json["config"] = serde_json::to_value(&cfg)?;
    let text = format!("baked {} in {seconds:.2} s\n{}", args.out.display(), summary_text(&json));
    Ok(Report::ok(json, text))
}

pub fn run_lod(args: &LodArgs) -> Result<Report, Failure> {
    let spec = load_spec(&args.scene)?;
    let (_, mut scene) = load_scene(&args.root)?;
    if scene.layout.grid_dims != spec.layout.grid_dims || scene.layout.origin != spec.layout.origin {
        return Err(Failure::Usage("scene spec layout does not match the baked assets".into()));
    }
    let field = build_field(&spec)?;
    extend_lods(&mut scene, &field, &spec.layout, args.lods, |l| spec.shader(l))?;
    let manifest = export_scene(&scene, &args.root)?;
    let json = summary(&scene, &manifest);
    let text = summary_text(&json);
    Ok(Report::ok(json, text))
}
