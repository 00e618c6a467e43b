//! Coarser levels of detail: 2x2 block groups merged into one block with the
//! grids re-sampled at half the per-block resolution.

use glam::DVec3;
use rayon::prelude::*;

use super::grids::{quantize_grids, sample_field_to_grids, BakeConfig};
use super::source::FieldSource;
use crate::scene::{BlockAssets, BlockFrame, BlockId, BlockLayout, OccupancyGrid};
use crate::{Error, Result};

/// Marks every parent cell overlapping an occupied child cell inside the
/// child's box. For bounded frames this is the max-pool of the 2x2
/// arrangement of child level-0 grids.
pub fn merge_occupancy(children: &[&BlockAssets], parent: &BlockFrame) -> OccupancyGrid {
    let mut out = OccupancyGrid::new(parent.voxel_dims);
    let dims = parent.voxel_dims;
    for child in children {
        let f = &child.frame;
        let size = f.dims_f();
        for [x, y, z] in child.occupancy.level0().iter_occupied() {
            let mut lo = DVec3::new(f64::from(x), f64::from(y), f64::from(z)) / size;
            let mut hi = DVec3::new(f64::from(x + 1), f64::from(y + 1), f64::from(z + 1)) / size;
            if f.unbounded {
                lo = lo.clamp(DVec3::splat(0.25), DVec3::splat(0.75));
                hi = hi.clamp(DVec3::splat(0.25), DVec3::splat(0.75));
                if lo.cmpge(hi).any() {
                    continue;
                }
            }
            let a = parent.to_grid(f.from_unit(lo));
            let b = parent.to_grid(f.from_unit(hi));
            let eps = 1e-9;
            let mut range = [[0u32; 2]; 3];
            for k in 0..3 {
                let (l, h) = (a[k].min(b[k]) + eps, a[k].max(b[k]) - eps);
                let max = dims[k] as f64 - 1.0;
                range[k] = [l.floor().clamp(0.0, max) as u32, h.floor().clamp(0.0, max) as u32];
            }
            for cz in range[2][0]..=range[2][1] {
                for cy in range[1][0]..=range[1][1] {
                    for cx in range[0][0]..=range[0][1] {
                        out.set(cx, cy, cz, true);
                    }
                }
            }
        }
    }
    out
}

/// Builds the block at LOD `l + 1` from its four LOD `l` children, given in
/// `(iy, ix)` order.
pub fn generate_lod<F: FieldSource + ?Sized>(
    src: &F,
    children: &[&BlockAssets],
    layout: &BlockLayout,
    cfg: &BakeConfig,
) -> Result<BlockAssets> {
    let first = children
        .first()
        .ok_or_else(|| Error::InvalidConfig("no child blocks given".into()))?;
    let lod = first.id().lod;
    if lod >= layout.lod_count {
        return Err(Error::NoCoarserLod(lod));
    }
    let parent = first.id().parent();
    let expected = parent.children();
    if children.len() != 4 || children.iter().zip(&expected).any(|(c, e)| c.id() != *e) {
        return Err(Error::IncompleteGroup(parent));
    }
    let frame = cfg.frame(layout, parent, src.is_unbounded(&parent));
    let grids = sample_field_to_grids(src, &frame, cfg.plane_dims(parent.lod), cfg.plane_share)?;
    let occupancy = merge_occupancy(children, &frame);
    quantize_grids(&grids, &cfg.quantization, occupancy, cfg.pyramid_levels)
}

/// Builds every block of LOD `l + 1` from the complete set of LOD `l` blocks.
pub fn generate_level<F: FieldSource + ?Sized>(
    src: &F,
    level: &[BlockAssets],
    layout: &BlockLayout,
    cfg: &BakeConfig,
) -> Result<Vec<BlockAssets>> {
    let lod = level
        .first()
        .map(|b| b.id().lod)
        .ok_or_else(|| Error::InvalidConfig("empty level".into()))?;
    if lod >= layout.lod_count {
        return Err(Error::NoCoarserLod(lod));
    }
    let find = |id: BlockId| level.iter().find(|b| b.id() == id);
    let parents: Vec<BlockId> = layout.blocks(lod + 1).collect();
    parents
        .par_iter()
        .map(|p| {
            let children: Vec<&BlockAssets> = p
                .children()
                .into_iter()
                .map(|c| find(c).ok_or(Error::IncompleteGroup(*p)))
                .collect::<Result<_>>()?;
            generate_lod(src, &children, layout, cfg)
        })
        .collect()
}
