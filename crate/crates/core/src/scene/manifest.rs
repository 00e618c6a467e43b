//! Streamable index of every baked block and its files.
//!
//! Stored as `manifest.json` at the asset root:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "layout": { "origin": [x, y], "block_size": s, "grid_dims": [nx, ny],
//!               "z_range": [z0, z1], "lod_count": L },
//!   "quantization": { "ranges": [[lo, hi], ...8] },
//!   "pyramid_levels": 3,
//!   "background": [r, g, b],
//!   "policy": { "lod_thresholds": [D1, ..., DL], "memory_budget": bytes },
//!   "shaders": [ { "name": "lod1/shader.json", "bytes": n, "sha256": "..." } ],
//!   "blocks": [ { "lod": 1, "ix": 0, "iy": 0, "dir": "lod1/block_0_0",
//!                 "voxel_dims": [..], "plane_dims": [[..], [..], [..]],
//!                 "unbounded": false, "atlas_macroblocks": n, "z_top": z,
//!                 "shader": "lod1/shader.json",
//!                 "files": [ { "name": "occupancy.bin", "bytes": n, "sha256": "..." } ] } ]
//! }
//! ```
//!
//! File names inside `files` are relative to the block directory; shader
//! names are relative to the root.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlockId, BlockLayout, QuantizationSpec};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];
pub const DEFAULT_MEMORY_BUDGET: u64 = 256 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub lod: u32,
    pub ix: u32,
    pub iy: u32,
    pub dir: String,
    pub voxel_dims: [u32; 3],
    pub plane_dims: [[u32; 2]; 3],
    pub unbounded: bool,
    pub atlas_macroblocks: u32,
    pub z_top: f64,
    pub shader: String,
    pub files: Vec<FileEntry>,
}

impl BlockEntry {
    pub fn id(&self) -> BlockId {
        BlockId::new(self.lod, self.ix, self.iy)
    }

    /// Total size of the block's own files.
    pub fn bytes(&self) -> u64 {
        self.files.iter().map(|f| f.bytes).sum()
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// `lod_thresholds[l - 1]` is the distance threshold of LOD `l`.
    pub lod_thresholds: Vec<f64>,
    pub memory_budget: u64,
}

impl PolicyParams {
    /// Twice the block diagonal at each LOD.
    pub fn defaults_for(layout: &BlockLayout) -> Self {
        PolicyParams {
            lod_thresholds: (1..=layout.lod_count)
                .map(|l| 2.0 * layout.block_diagonal(l))
                .collect(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format_version: u32,
    pub layout: BlockLayout,
    pub quantization: QuantizationSpec,
    pub pyramid_levels: u32,
    pub background: [f64; 3],
    pub policy: PolicyParams,
    pub shaders: Vec<FileEntry>,
    pub blocks: Vec<BlockEntry>,
}

impl SceneManifest {
    pub fn new(layout: BlockLayout, quantization: QuantizationSpec, pyramid_levels: u32) -> Self {
        let policy = PolicyParams::defaults_for(&layout);
        SceneManifest {
            format_version: FORMAT_VERSION,
            layout,
            quantization,
            pyramid_levels,
            background: DEFAULT_BACKGROUND,
            policy,
            shaders: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: SceneManifest =
            serde_json::from_str(&text).map_err(|e| Error::asset(&path, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::asset(
                &path,
                format!("unsupported format_version {}", m.format_version),
            ));
        }
        m.validate_structure().map_err(|e| Error::asset(&path, e.to_string()))?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))
    }

    pub fn entry(&self, id: &BlockId) -> Option<&BlockEntry> {
        self.blocks.iter().find(|b| b.id() == *id)
    }

    pub fn block_bytes(&self, id: &BlockId) -> Option<u64> {
        self.entry(id).map(BlockEntry::bytes)
    }

    /// Bytes of all block files at one LOD.
    pub fn lod_bytes(&self, lod: u32) -> u64 {
        self.blocks
            .iter()
            .filter(|b| b.lod == lod)
            .map(BlockEntry::bytes)
            .sum()
    }

    /// Every block implied by the layout appears exactly once, and nothing else does.
    pub fn validate_structure(&self) -> Result<()> {
        self.layout.validate()?;
        self.quantization.validate()?;
        if self.policy.lod_thresholds.len() != self.layout.lod_count as usize {
            return Err(Error::InvalidConfig(format!(
                "{} LOD thresholds for {} LODs",
                self.policy.lod_thresholds.len(),
                self.layout.lod_count
            )));
        }
        let mut seen = BTreeMap::new();
        for b in &self.blocks {
            let id = b.id();
            if !self.layout.contains(&id) {
                return Err(Error::UnknownBlock(id));
            }
            if seen.insert(id, ()).is_some() {
                return Err(Error::InvalidConfig(format!("block {id} listed twice")));
            }
        }
        for id in self.layout.all_blocks() {
            if !seen.contains_key(&id) {
                return Err(Error::InvalidConfig(format!("block {id} missing")));
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists under `root` with the recorded size.
    pub fn validate_files(&self, root: &Path) -> Result<()> {
        let check = |path: &Path, expected: u64| -> Result<()> {
            let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
            if meta.len() != expected {
                return Err(Error::asset(
                    path,
                    format!("size {} differs from manifest size {expected}", meta.len()),
                ));
            }
            Ok(())
        };
        for s in &self.shaders {
            check(&root.join(&s.name), s.bytes)?;
        }
        for b in &self.blocks {
            for f in &b.files {
                check(&root.join(&b.dir).join(&f.name), f.bytes)?;
            }
            if !self.shaders.iter().any(|s| s.name == b.shader) {
                return Err(Error::InvalidConfig(format!(
                    "block {} references unknown shader {}",
                    b.id(),
                    b.shader
                )));
            }
        }
        Ok(())
    }
}
