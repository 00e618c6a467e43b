//! Self-checks of a baked scene: block-wise compositing against single-pass
//! integration, segment opacity, empty-space skipping, and export round trip.

use std::path::{Path, PathBuf};
use std::time::Instant;

use blockfield_core::bake::{bake_scene, load_scene};
use blockfield_core::render::{
    abs_diff, accumulate_segment, composite_appearance, render_frame, render_monolithic, Camera, MarchOptions,
    RenderOptions, SamplePoint, ShadedBlock, SkipMode,
};
use blockfield_core::scene::{BlockId, SceneManifest};
use blockfield_core::synth::{orbit_path, SceneSpec};
use clap::Args;
use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::synth::load_spec;
use crate::{Failure, OutputArgs, Report};

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-5;
pub const OPACITY_TOLERANCE: f64 = 1e-6;
pub const SKIP_MEAN_TOLERANCE: f64 = 2.0 / 255.0;
pub const SKIP_MAX_TOLERANCE: f64 = 8.0 / 255.0;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Asset directory.
    #[arg(long)]
    pub root: PathBuf,
    /// The spec the assets were baked from.
    #[arg(long)]
    pub scene: PathBuf,
    /// Random instances for the equivalence and opacity suites.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frame size for the image suites.
    #[arg(long, default_value_t = 128)]
    pub size: u32,
    /// Orbit poses used by the image suites.
    #[arg(long, default_value_t = 3)]
    pub poses: usize,
    #[command(flatten)]
    pub fmt: OutputArgs,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Random opacity with some exact zeros and near-opaque values mixed in.
fn random_alpha(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..20) {
        0 => 0.0,
        1 => 1.0 - rng.random_range(0.0..1e-6),
        _ => rng.random_range(0.0..1.0),
    }
}

fn random_sample(rng: &mut ChaCha8Rng, t: f64) -> SamplePoint {
    let c = DVec3::new(rng.random(), rng.random(), rng.random());
    let f = [rng.random(), rng.random(), rng.random(), rng.random()];
    SamplePoint::with_alpha(t, random_alpha(rng), c, f)
}

/// Random ray split into at most `max_blocks` contiguous runs.
pub fn random_instance(rng: &mut ChaCha8Rng, max_blocks: u32, max_samples: usize) -> Vec<Vec<SamplePoint>> {
    let k = rng.random_range(1..=max_blocks);
    let mut t = 0.0;
    (0..k)
        .map(|_| {
            let n = rng.random_range(0..=max_samples);
            (0..n)
                .map(|_| {
                    t += rng.random_range(1e-3..0.1);
                    random_sample(rng, t)
                })
                .collect()
        })
        .collect()
}

pub fn equivalence_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let start = Instant::now();
    for _ in 0..trials {
        let runs = random_instance(&mut rng, 8, 32);
        let segs: Vec<_> = runs
            .iter()
            .enumerate()
            .map(|(i, s)| accumulate_segment(BlockId::new(1, i as u32, 0), i as f64, s, 0.0))
            .collect();
        let all: Vec<SamplePoint> = runs.concat();
        let (Ok(a), Ok(b)) = (composite_appearance(&segs), render_monolithic(&all, None)) else {
            failures += 1;
            continue;
        };
        let mut err = (a.color - b.color).abs().max_element().max((a.alpha - b.alpha).abs());
        for c in 0..4 {
            err = err.max((a.feature[c] - b.feature[c]).abs());
        }
        if !(err <= EQUIVALENCE_TOLERANCE) {
            failures += 1;
        }
        worst = worst.max(err);
    }
    SuiteResult {
        name: "equivalence",
        passed: failures == 0,
        max_error: worst,
        tolerance: EQUIVALENCE_TOLERANCE,
        detail: format!("{trials} instances, {failures} failures, {:.2} s", start.elapsed().as_secs_f64()),
    }
}

pub fn opacity_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0FAC_17E5);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(0..=32);
        let samples: Vec<SamplePoint> = (0..n).map(|i| random_sample(&mut rng, i as f64)).collect();
        let seg = accumulate_segment(BlockId::new(1, 0, 0), 0.0, &samples, 0.0);
        let product: f64 = samples.iter().map(|s| 1.0 - s.alpha).product();
        worst = worst.max(((1.0 - seg.alpha) - product).abs());
    }
    SuiteResult {
        name: "opacity",
        passed: worst <= OPACITY_TOLERANCE,
        max_error: worst,
        tolerance: OPACITY_TOLERANCE,
        detail: format!("{trials} segments"),
    }
}

/// `count` poses spread evenly over the spec's orbit.
pub fn orbit_poses(spec: &SceneSpec, count: usize, size: u32) -> Result<Vec<Camera>, Failure> {
    let cams = orbit_path(&spec.camera_path)?;
    let count = count.clamp(1, cams.len());
    Ok((0..count)
        .map(|i| cams[i * cams.len() / count].with_resolution(size, size))
        .collect())
}

fn skip_options(skip: SkipMode, background: DVec3) -> RenderOptions {
    RenderOptions {
        march: MarchOptions {
            skip,
            ..MarchOptions::default()
        },
        background,
        ..RenderOptions::default()
    }
}

pub fn skip_suite(blocks: &[ShadedBlock], cams: &[Camera], background: DVec3) -> Result<SuiteResult, Failure> {
    let (mut mean, mut max) = (0.0f64, 0.0f64);
    for cam in cams {
        let fast = render_frame(cam, blocks, &skip_options(SkipMode::Hierarchical, background))?;
        let slow = render_frame(cam, blocks, &skip_options(SkipMode::Exhaustive, background))?;
        let (m, x) = abs_diff(&fast, &slow)?;
        mean = mean.max(m);
        max = max.max(x);
    }
    Ok(SuiteResult {
        name: "skip",
        passed: mean <= SKIP_MEAN_TOLERANCE && max <= SKIP_MAX_TOLERANCE,
        max_error: max,
        tolerance: SKIP_MAX_TOLERANCE,
        detail: format!(
            "{} poses, worst mean {:.5} (tolerance {:.5}), worst max {:.5}",
            cams.len(),
            mean,
            SKIP_MEAN_TOLERANCE,
            max
        ),
    })
}

/// Loads the assets with hash checks, re-bakes the spec in memory and
/// requires identical blocks and byte-identical renders at every LOD.
pub fn roundtrip_suite(root: &Path, spec: &SceneSpec, cam: &Camera) -> SuiteResult {
    let fail = |detail: String| SuiteResult {
        name: "roundtrip",
        passed: false,
        max_error: f64::INFINITY,
        tolerance: 0.0,
        detail,
    };
    let (_, disk) = match load_scene(root) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let memory = match bake_scene(spec, &disk.config, Some(disk.lod_count())) {
        Ok(s) => s,
        Err(e) => return fail(format!("re-bake failed: {e}")),
    };
    let mismatched: Vec<String> = memory
        .levels
        .iter()
        .flatten()
        .filter(|b| disk.block(&b.id()) != Some(*b))
        .map(|b| b.id().to_string())
        .collect();
    if !mismatched.is_empty() {
        return fail(format!("blocks differ from a fresh bake: {}", mismatched.join(", ")));
    }
    let opts = RenderOptions {
        background: DVec3::from_array(disk.background),
        ..RenderOptions::default()
    };
    let mut worst = 0.0f64;
    for lod in 1..=disk.lod_count() {
        let a = render_frame(cam, &disk.render_blocks(lod), &opts);
        let b = render_frame(cam, &memory.render_blocks(lod), &opts);
        match (a, b) {
            (Ok(a), Ok(b)) if a.to_pfm() == b.to_pfm() => {}
            (Ok(a), Ok(b)) => worst = worst.max(abs_diff(&a, &b).map(|d| d.1).unwrap_or(f64::INFINITY)),
            (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
        }
    }
    SuiteResult {
        name: "roundtrip",
        passed: worst == 0.0,
        max_error: worst,
        tolerance: 0.0,
        detail: format!("{} LODs compared", disk.lod_count()),
    }
}

pub fn run(args: &VerifyArgs) -> Result<Report, Failure> {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let spec = load_spec(&args.scene)?;
    let manifest = SceneManifest::load(&args.root)?;
    let background = DVec3::from_array(manifest.background);
    let cams = orbit_poses(&spec, args.poses, args.size)?;

    let mut suites = vec![
        equivalence_suite(args.trials, args.seed),
        opacity_suite(args.trials, args.seed),
    ];
    match blockfield_core::bake::load_lod(&args.root, &manifest, 1) {
        Ok(blocks) => suites.push(skip_suite(&blocks, &cams, background)?),
        Err(e) => suites.push(SuiteResult {
            name: "skip",
            passed: false,
            max_error: f64::INFINITY,
            tolerance: SKIP_MAX_TOLERANCE,
            detail: format!("assets unreadable: {e}"),
        }),
    }
    suites.push(roundtrip_suite(&args.root, &spec, &cams[0]));

    let passed = suites.iter().all(|s| s.passed);
    let text = suites
        .iter()
        .map(|s| {
            format!(
                "{} {:<12} max error {:.3e} (tolerance {:.1e}): {}",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                s.max_error,
                s.tolerance,
                s.detail
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let json = json!({ "passed": passed, "suites": suites });
    Ok(Report {
        json,
        text,
        failed: !passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_suites_pass() {
        assert!(equivalence_suite(2000, 7).passed);
        assert!(opacity_suite(2000, 7).passed);
    }

    #[test]
    fn instances_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let runs = random_instance(&mut rng, 8, 32);
            assert!((1..=8).contains(&runs.len()));
            assert!(runs.iter().all(|r| r.len() <= 32));
            let ts: Vec<f64> = runs.concat().iter().map(|s| s.t).collect();
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
