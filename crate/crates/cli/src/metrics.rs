use std::path::PathBuf;
use std::time::Instant;

use blockfield_core::bake::{analytic_blocks, load_scene, BakedScene};
use blockfield_core::render::{abs_diff, psnr, render_frame, render_frame_with_stats, Camera, RenderBlock, RenderOptions};
use blockfield_core::render::{MarchOptions, SkipMode};
use blockfield_core::synth::build_field;
use clap::Args;
use glam::DVec3;
use serde::Serialize;
use serde_json::json;

use crate::bake::summary;
use crate::synth::load_spec;
use crate::verify::orbit_poses;
use crate::{Failure, OutputArgs, Report};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Asset directory.
    #[arg(long)]
    pub root: PathBuf,
    /// The spec the assets were baked from.
    #[arg(long)]
    pub scene: PathBuf,
    /// Frame size.
    #[arg(long, default_value_t = 256)]
    pub size: u32,
    /// Orbit poses to average over.
    #[arg(long, default_value_t = 3)]
    pub poses: usize,
    /// Timing repeats; the fastest run counts.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkipMetrics {
    /// Worst per-pose mean absolute difference, skipping vs exhaustive.
    pub mean_diff: f64,
    pub max_diff: f64,
    /// Skipping render time over exhaustive render time, summed over poses.
    pub time_ratio: f64,
    pub evaluated_fraction: f64,
}

fn options(skip: SkipMode, background: DVec3) -> RenderOptions {
    RenderOptions {
        march: MarchOptions {
            skip,
            ..MarchOptions::default()
        },
        background,
        ..RenderOptions::default()
    }
}

fn timed<B: RenderBlock>(cam: &Camera, blocks: &[B], opts: &RenderOptions, repeats: usize) -> Result<(f64, u64), Failure> {
    let mut best = f64::INFINITY;
    let mut evaluated = 0;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let (_, stats) = render_frame_with_stats(cam, blocks, opts)?;
        best = best.min(start.elapsed().as_secs_f64());
        evaluated = stats.evaluated;
    }
    Ok((best, evaluated))
}

/// Compares hierarchical skipping against exhaustive marching.
pub fn skip_metrics<B: RenderBlock>(
    blocks: &[B],
    cams: &[Camera],
    background: DVec3,
    repeats: usize,
) -> Result<SkipMetrics, Failure> {
    let fast = options(SkipMode::Hierarchical, background);
    let slow = options(SkipMode::Exhaustive, background);
    let (mut mean, mut max) = (0.0f64, 0.0f64);
    let (mut t_fast, mut t_slow) = (0.0, 0.0);
    let (mut n_fast, mut n_slow) = (0u64, 0u64);
    for cam in cams {
        let (m, x) = abs_diff(&render_frame(cam, blocks, &fast)?, &render_frame(cam, blocks, &slow)?)?;
        mean = mean.max(m);
        max = max.max(x);
        let (t, n) = timed(cam, blocks, &fast, repeats)?;
        t_fast += t;
        n_fast += n;
        let (t, n) = timed(cam, blocks, &slow, repeats)?;
        t_slow += t;
        n_slow += n;
    }
    Ok(SkipMetrics {
        mean_diff: mean,
        max_diff: max,
        time_ratio: t_fast / t_slow.max(f64::MIN_POSITIVE),
        evaluated_fraction: n_fast as f64 / n_slow.max(1) as f64,
    })
}

/// PSNR of baked finest-LOD renders against the analytic field, per pose.
pub fn fidelity(scene: &BakedScene, spec: &blockfield_core::synth::SceneSpec, cams: &[Camera]) -> Result<Vec<f64>, Failure> {
    let field = build_field(spec)?;
    let opts = RenderOptions {
        background: DVec3::from_array(scene.background),
        ..RenderOptions::default()
    };
    let baked = scene.render_blocks(1);
    let reference = analytic_blocks(scene, &field, 1, false);
    cams.iter()
        .map(|cam| Ok(psnr(&render_frame(cam, &baked, &opts)?, &render_frame(cam, &reference, &opts)?)?))
        .collect()
}

pub fn run(args: &MetricsArgs) -> Result<Report, Failure> {
    let spec = load_spec(&args.scene)?;
    let (manifest, scene) = load_scene(&args.root)?;
    let cams = orbit_poses(&spec, args.poses, args.size)?;
    let psnrs = fidelity(&scene, &spec, &cams)?;
    let mean_psnr = psnrs.iter().sum::<f64>() / psnrs.len() as f64;
    let min_psnr = psnrs.iter().cloned().fold(f64::INFINITY, f64::min);
    let skip = skip_metrics(&scene.render_blocks(1), &cams, DVec3::from_array(scene.background), args.repeats)?;
    let mut json = summary(&scene, &manifest);
    json["size"] = json!(args.size);
    json["psnr"] = json!({ "per_pose": psnrs, "mean": mean_psnr, "min": min_psnr });
    json["skip"] = serde_json::to_value(&skip)?;
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_vec_pretty(&json)?)?;
    }
    let text = format!(
        "PSNR mean {mean_psnr:.2} dB, min {min_psnr:.2} dB\n\
         skip: mean diff {:.5}, max diff {:.5}, time ratio {:.3}, evaluated {:.1}%",
        skip.mean_diff,
        skip.max_diff,
        skip.time_ratio,
        100.0 * skip.evaluated_fraction
    );
    Ok(Report::ok(json, text))
}
