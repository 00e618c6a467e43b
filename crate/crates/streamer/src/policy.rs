//! Which blocks to draw, at which LOD, in which order.

use std::collections::HashMap;

use blockfield_core::geometry::Rect;
use blockfield_core::render::Camera;
use blockfield_core::scene::{BlockId, BlockLayout, SceneManifest};
use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-block metadata needed for planning, indexed from a manifest.
#[derive(Clone, Debug)]
pub struct SceneIndex {
    pub layout: BlockLayout,
    pub thresholds: Vec<f64>,
    pub budget: u64,
    meta: HashMap<BlockId, BlockMeta>,
}

#[derive(Clone, Copy, Debug)]
struct BlockMeta {
    z_top: f64,
    bytes: u64,
}

impl SceneIndex {
    pub fn from_manifest(m: &SceneManifest) -> Result<Self> {
        m.validate_structure()?;
        let meta = m
            .blocks
            .iter()
            .map(|b| {
                let z = b.z_top.clamp(m.layout.z_range[0], m.layout.z_range[1]);
                (b.id(), BlockMeta { z_top: z, bytes: b.bytes() })
            })
            .collect();
        Ok(SceneIndex {
            layout: m.layout.clone(),
            thresholds: m.policy.lod_thresholds.clone(),
            budget: m.policy.memory_budget,
            meta,
        })
    }

    fn meta(&self, id: &BlockId) -> Result<BlockMeta> {
        self.meta.get(id).copied().ok_or(Error::UnknownBlock(*id))
    }

    pub fn bytes(&self, id: &BlockId) -> Result<u64> {
        Ok(self.meta(id)?.bytes)
    }

    pub fn z_top(&self, id: &BlockId) -> Result<f64> {
        Ok(self.meta(id)?.z_top)
    }

    /// Footprint center at the height of the block's highest occupied cell.
    pub fn render_center(&self, id: &BlockId) -> Result<DVec3> {
        Ok(self.layout.center(id).extend(self.z_top(id)?))
    }

    pub fn is_visible(&self, camera: &Camera, id: &BlockId) -> Result<bool> {
        Ok(visible(camera, &self.layout.footprint(id), self.z_top(id)?))
    }
}

/// True if the footprint rectangle raised to `z_top` projects onto the image,
/// or the camera is above the footprint. The rectangle is clipped against the
/// viewing frustum, so the test is exact up to a small tolerance.
pub fn visible(camera: &Camera, footprint: &Rect, z_top: f64) -> bool {
    let eye = camera.position.truncate();
    if footprint.contains(eye) {
        return true;
    }
    let mut poly: Vec<DVec3> = footprint
        .corners()
        .iter()
        .map(|c| camera.to_camera(c.extend(z_top)))
        .collect();
    let (w, h) = (f64::from(camera.width), f64::from(camera.height));
    let planes = [
        DVec3::new(0.0, 0.0, 1.0),
        DVec3::new(camera.fx, 0.0, camera.cx),
        DVec3::new(-camera.fx, 0.0, w - camera.cx),
        DVec3::new(0.0, camera.fy, camera.cy),
        DVec3::new(0.0, -camera.fy, h - camera.cy),
    ];
    let scale = poly.iter().map(|q| q.length()).fold(1.0, f64::max);
    let eps = 1e-9 * scale;
    for n in planes {
        poly = clip(&poly, n, eps);
        if poly.is_empty() {
            return false;
        }
    }
    true
}

/// One Sutherland-Hodgman pass keeping `n . q >= -eps`.
fn clip(poly: &[DVec3], n: DVec3, eps: f64) -> Vec<DVec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, &a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (n.dot(a) + eps, n.dot(b) + eps);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(a + (b - a) * (da / (da - db)));
        }
    }
    out
}

/// A block chosen for rendering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedBlock {
    pub id: BlockId,
    /// xy distance from the camera to the block center; the depth-sort key.
    pub distance: f64,
    pub bytes: u64,
}

/// Blocks to draw front-to-back, plus the residency changes that realize them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderPlan {
    /// Camera position the plan was made for.
    pub eye: DVec3,
    pub blocks: Vec<PlannedBlock>,
    pub load: Vec<BlockId>,
    pub evict: Vec<BlockId>,
}

impl RenderPlan {
    pub fn ids(&self) -> Vec<BlockId> {
        self.blocks.iter().map(|b| b.id).collect()
    }

    pub fn bytes(&self) -> u64 {
        self.blocks.iter().map(|b| b.bytes).sum()
    }
}

/// Ascending xy distance from `eye` to block centers; ties by `(lod, iy, ix)`.
pub fn depth_sort(blocks: &[BlockId], layout: &BlockLayout, eye: DVec3) -> Vec<(BlockId, f64)> {
    let e = eye.truncate();
    let mut out: Vec<(BlockId, f64)> = blocks
        .iter()
        .map(|id| (*id, layout.center(id).distance(e)))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

/// `thresholds[l - 1]` belongs to LOD `l` and must grow with `l`.
fn check_thresholds(layout: &BlockLayout, thresholds: &[f64]) -> Result<()> {
    if thresholds.len() != layout.lod_count as usize {
        return Err(Error::InvalidThresholds(format!(
            "{} thresholds for {} LODs",
            thresholds.len(),
            layout.lod_count
        )));
    }
    if thresholds.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidThresholds(format!("{thresholds:?}")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidThresholds(format!(
            "{thresholds:?} must increase strictly towards coarser LODs"
        )));
    }
    Ok(())
}

/// Coarse-to-fine descent. A block at LOD `l > 1` is drawn as is when its
/// render center is farther than the threshold of LOD `l - 1`; otherwise its
/// children are considered. Blocks whose whole subtree is invisible are
/// culled. The result covers every visible finest block's footprint exactly
/// once.
pub fn select_lod(camera: &Camera, index: &SceneIndex, thresholds: &[f64]) -> Result<RenderPlan> {
    camera.validate()?;
    let layout = &index.layout;
    check_thresholds(layout, thresholds)?;
    let top = layout.lod_count;

    // A block is worth descending into if it or any descendant is visible.
    let mut live: HashMap<BlockId, bool> = HashMap::new();
    for lod in 1..=top {
        for id in layout.blocks(lod) {
            let below = id.children().iter().any(|c| live[c]);
            live.insert(id, below || index.is_visible(camera, &id)?);
        }
    }

    let eye = camera.position;
    let mut chosen = Vec::new();
    let mut stack: Vec<BlockId> = layout.blocks(top).collect();
    while let Some(id) = stack.pop() {
        if !live[&id] {
            continue;
        }
        if id.lod == 1 || index.render_center(&id)?.distance(eye) > thresholds[id.lod as usize - 2] {
            chosen.push(id);
        } else {
            stack.extend(id.children());
        }
    }
    let blocks = depth_sort(&chosen, layout, eye)
        .into_iter()
        .map(|(id, distance)| {
            Ok(PlannedBlock {
                id,
                distance,
                bytes: index.bytes(&id)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RenderPlan {
        eye,
        load: blocks.iter().map(|b| b.id).collect(),
        blocks,
        evict: Vec::new(),
    })
}
