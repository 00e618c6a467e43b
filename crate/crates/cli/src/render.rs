use std::path::{Path, PathBuf};
use std::time::Instant;

use blockfield_core::bake::load_lod;
use blockfield_core::render::{
    render_frame_with_stats, Camera, Framebuffer, MarchOptions, RenderOptions, ShadedBlock, ShadingMode, SkipMode,
};
use blockfield_core::scene::SceneManifest;
use blockfield_streamer::{degrade_to_budget, select_lod, DiskFetcher, ResidentSet, SceneIndex};
use clap::Args;
use glam::DVec3;
use serde_json::json;

use crate::{Failure, OutputArgs, Report};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Asset directory.
    #[arg(long)]
    pub root: PathBuf,
    /// Camera pose file.
    #[arg(long)]
    pub camera: PathBuf,
    /// Output image: `.png` for 8-bit, `.pfm` for float.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// per-block, post-composite or diffuse.
    #[arg(long, default_value = "per-block")]
    pub mode: ShadingMode,
    /// March every sample instead of skipping empty space.
    #[arg(long)]
    pub no_occupancy_skip: bool,
    /// Background as `r,g,b` in [0, 1]; defaults to the manifest's.
    #[arg(long, value_parser = parse_rgb)]
    pub background: Option<DVec3>,
    /// Render every block of one LOD instead of the streaming plan.
    #[arg(long)]
    pub lod: Option<u32>,
    /// Memory budget for the streaming plan; defaults to the manifest's.
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub camera: PathBuf,
    /// Memory budget in bytes; defaults to the manifest's.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Per-LOD distance thresholds, finest first, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

fn parse_rgb(s: &str) -> Result<DVec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [r, g, b] if v.iter().all(|c| (0.0..=1.0).contains(c)) => Ok(DVec3::new(r, g, b)),
        _ => Err(format!("expected r,g,b in [0, 1], got {s}")),
    }
}

fn load_camera(path: &Path, width: Option<u32>, height: Option<u32>) -> Result<Camera, Failure> {
    let cam = Camera::load(path)?;
    Ok(match (width, height) {
        (None, None) => cam,
        (w, h) => cam.with_resolution(w.unwrap_or(cam.width), h.unwrap_or(cam.height)),
    })
}

/// Blocks the streaming policy would have resident and drawn for this pose.
pub fn planned_blocks(root: &Path, manifest: &SceneManifest, cam: &Camera, budget: u64) -> Result<Vec<ShadedBlock>, Failure> {
    let index = SceneIndex::from_manifest(manifest)?;
    let plan = select_lod(cam, &index, &index.thresholds)?;
    let mut set = ResidentSet::new(budget);
    let mut fetcher = DiskFetcher::new(root)?;
    let report = set.apply_plan(&plan, &index, &mut fetcher)?;
    let snap = set.snapshot(&report.plan.plan);
    Ok(snap.blocks.iter().map(|(_, b)| (**b).clone()).collect())
}

pub fn write_image(fb: &Framebuffer, path: &Path) -> Result<(), Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => fb.write_pfm(path)?,
        Some("png") => fb.write_png(path)?,
        _ => return Err(Failure::Usage(format!("{}: output must end in .png or .pfm", path.display()))),
    }
    Ok(())
}

pub fn run_render(args: &RenderArgs) -> Result<Report, Failure> {
    let manifest = SceneManifest::load(&args.root)?;
    let cam = load_camera(&args.camera, args.width, args.height)?;
    let blocks = match args.lod {
        Some(l) if l == 0 || l > manifest.layout.lod_count => {
            return Err(Failure::Usage(format!("--lod {l} outside 1..={}", manifest.layout.lod_count)))
        }
        Some(l) => load_lod(&args.root, &manifest, l)?,
        None => planned_blocks(&args.root, &manifest, &cam, args.budget.unwrap_or(manifest.policy.memory_budget))?,
    };
    let opts = RenderOptions {
        march: MarchOptions {
            skip: if args.no_occupancy_skip {
                SkipMode::Exhaustive
            } else {
                SkipMode::Hierarchical
            },
            ..MarchOptions::default()
        },
        shading: args.mode,
        background: args.background.unwrap_or(DVec3::from_array(manifest.background)),
    };
    let start = Instant::now();
    let (fb, stats) = render_frame_with_stats(&cam, &blocks, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    write_image(&fb, &args.out)?;
    let ids: Vec<String> = blocks.iter().map(|b| b.assets.id().to_string()).collect();
    let json = json!({
        "out": args.out,
        "width": cam.width,
        "height": cam.height,
        "blocks": ids,
        "samples_evaluated": stats.evaluated,
        "samples_skipped": stats.skipped,
        "seconds": seconds,
    });
    let text = format!(
        "wrote {} ({}x{}, {} blocks, {:.2} s)",
        args.out.display(),
        cam.width,
        cam.height,
        blocks.len(),
        seconds
    );
    Ok(Report::ok(json, text))
}

pub fn run_plan(args: &PlanArgs) -> Result<Report, Failure> {
    let manifest = SceneManifest::load(&args.root)?;
    let cam = Camera::load(&args.camera)?;
    let index = SceneIndex::from_manifest(&manifest)?;
    let thresholds = args.thresholds.clone().unwrap_or_else(|| index.thresholds.clone());
    let plan = select_lod(&cam, &index, &thresholds)?;
    let budget = args.budget.unwrap_or(index.budget);
    let fitted = degrade_to_budget(&plan, &index, budget)?;
    let mut json = serde_json::to_value(&fitted)?;
    json["budget"] = json!(budget);
    json["bytes"] = json!(fitted.plan.bytes());
    json["thresholds"] = json!(thresholds);
    let text = serde_json::to_string_pretty(&json)?;
    Ok(Report::ok(json, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_parsing() {
        assert_eq!(parse_rgb("0,0.5,1").unwrap(), DVec3::new(0.0, 0.5, 1.0));
        assert!(parse_rgb("0,0.5").is_err());
        assert!(parse_rgb("0,0.5,2").is_err());
        assert!(parse_rgb("a,b,c").is_err());
    }

    #[test]
    fn image_format_follows_extension() {
        let fb = Framebuffer::new(2, 2);
        let dir = tempfile::tempdir().unwrap();
        assert!(write_image(&fb, &dir.path().join("x.pfm")).is_ok());
        assert!(write_image(&fb, &dir.path().join("x.png")).is_ok());
        assert_eq!(write_image(&fb, &dir.path().join("x.jpg")).unwrap_err().code(), crate::EXIT_USAGE);
    }
}
