//! End-to-end runs of the `blockfield` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn blockfield(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockfield"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const SMALL: [&str; 6] = ["--voxel-res", "16", "--triplane-res", "16", "--ray-budget", "20000"];

/// Writes a city spec and its orbit poses, then bakes it into `assets`.
fn baked(dir: &Path, extra: &[&str]) {
    let out = blockfield(&["synth", "--preset", "city", "--out", "city.json", "--poses", "poses"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut args = vec!["bake", "--scene", "city.json", "--out", "assets"];
    args.extend(SMALL);
    args.extend(extra);
    let out = blockfield(&args, dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    baked(d, &[]);
    assert!(d.join("assets/manifest.json").is_file());
    assert!(d.join("assets/bake.json").is_file());

    let out = blockfield(
        &["render", "--root", "assets", "--camera", "poses/pose_000.json", "--out", "a.png", "--width", "48", "--height", "32", "--json"],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["width"], 48);
    assert!(!v["blocks"].as_array().unwrap().is_empty());
    assert!(d.join("a.png").is_file());

    let out = blockfield(&["render", "--root", "assets", "--camera", "poses/pose_000.json", "--out", "a.pfm", "--lod", "2"], d);
    assert_eq!(code(&out), 0);
    let out = blockfield(&["render", "--root", "assets", "--camera", "poses/pose_000.json", "--out", "b.pfm", "--lod", "2"], d);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(d.join("a.pfm")).unwrap(), std::fs::read(d.join("b.pfm")).unwrap());

    let out = blockfield(&["plan", "--root", "assets", "--camera", "poses/pose_000.json", "--budget", "1000000000"], d);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let blocks = v["plan"]["blocks"].as_array().unwrap();
    assert!(!blocks.is_empty());
    assert!(v["bytes"].as_u64().unwrap() <= 1_000_000_000);

    let out = blockfield(&["verify", "--root", "assets", "--scene", "city.json", "--trials", "2000", "--size", "48", "--json"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 4);

    let out = blockfield(&["metrics", "--root", "assets", "--scene", "city.json", "--size", "32", "--poses", "1", "--repeats", "1", "--json"], d);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["psnr"]["mean"].as_f64().unwrap() > 20.0);
}

#[test]
fn bakes_are_reproducible_and_lod_extends_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    baked(d, &[]);
    let mut args = vec!["bake", "--scene", "city.json", "--out", "again"];
    args.extend(SMALL);
    assert_eq!(code(&blockfield(&args, d)), 0);
    assert_eq!(tree(&d.join("assets")), tree(&d.join("again")));

    let mut args = vec!["bake", "--scene", "city.json", "--out", "one", "--lods", "1"];
    args.extend(SMALL);
    assert_eq!(code(&blockfield(&args, d)), 0);
    assert!(!d.join("one/lod2").exists());
    let out = blockfield(&["lod", "--root", "one", "--scene", "city.json", "--lods", "2", "--json"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["lods"].as_array().unwrap().len(), 2);
    assert_eq!(tree(&d.join("one")), tree(&d.join("assets")));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    baked(d, &[]);

    assert_eq!(code(&blockfield(&["render", "--bogus"], d)), 2);
    assert_eq!(code(&blockfield(&["frobnicate"], d)), 2);
    assert_eq!(code(&blockfield(&["synth", "--preset", "nowhere"], d)), 2);
    assert_eq!(code(&blockfield(&["verify", "--root", "assets", "--scene", "city.json", "--trials", "0"], d)), 2);
    assert_eq!(code(&blockfield(&["verify", "--root", "missing", "--scene", "city.json"], d)), 3);
    let out = blockfield(&["render", "--root", "missing", "--camera", "poses/pose_000.json", "--out", "x.png", "--json"], d);
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["exit_code"], 3);
    let out = blockfield(&["render", "--root", "assets", "--camera", "poses/pose_000.json", "--out", "x.bmp"], d);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&blockfield(&["--help"], d)), 0);

    let manifest: Value = serde_json::from_slice(&std::fs::read(d.join("assets/manifest.json")).unwrap()).unwrap();
    let block = &manifest["blocks"][0];
    let file = block["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["name"].as_str().unwrap().ends_with(".png"))
        .unwrap();
    let path = d.join("assets").join(block["dir"].as_str().unwrap()).join(file["name"].as_str().unwrap());
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x5a;
    std::fs::write(&path, bytes).unwrap();
    let out = blockfield(&["verify", "--root", "assets", "--scene", "city.json", "--trials", "100", "--size", "32", "--json"], d);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["passed"], false);
    let failed: Vec<&str> = v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["passed"] == false)
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"roundtrip"), "{failed:?}");
}
