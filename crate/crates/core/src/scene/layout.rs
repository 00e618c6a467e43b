//! Uniform ground-plane partition of the scene into blocks, and its LOD hierarchy.

use std::fmt;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Rect};
use crate::{Error, Result};

/// Uniform xy grid of finest-LOD blocks. The scene is never split along z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    /// World-space xy corner of block (0, 0) at every LOD.
    pub origin: [f64; 2],
    /// Edge length of one finest-LOD block.
    pub block_size: f64,
    /// Number of finest-LOD blocks along x and y.
    pub grid_dims: [u32; 2],
    pub z_range: [f64; 2],
    pub lod_count: u32,
}

/// Identifies one block at one level of detail. LOD 1 is the finest.
///
/// The derived ordering is `(lod, iy, ix)`, which is the tie-break order used
/// wherever blocks must be ranked deterministically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId {
    pub lod: u32,
    pub iy: u32,
    pub ix: u32,
}

impl BlockId {
    pub fn new(lod: u32, ix: u32, iy: u32) -> Self {
        BlockId { lod, iy, ix }
    }

    /// Asset directory of this block relative to the asset root.
    pub fn dir_name(&self) -> String {
        format!("lod{}/block_{}_{}", self.lod, self.ix, self.iy)
    }

    pub fn parent(&self) -> BlockId {
        BlockId::new(self.lod + 1, self.ix / 2, self.iy / 2)
    }

    /// The 2x2 group merged into this block, in (iy, ix) order. Empty at LOD 1.
    pub fn children(&self) -> Vec<BlockId> {
        if self.lod <= 1 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(4);
        for dy in 0..2 {
            for dx in 0..2 {
                out.push(BlockId::new(self.lod - 1, self.ix * 2 + dx, self.iy * 2 + dy));
            }
        }
        out
    }

    /// True if `other` is this block or lies beneath it in the hierarchy.
    pub fn covers(&self, other: &BlockId) -> bool {
        if other.lod > self.lod {
            return false;
        }
        let shift = self.lod - other.lod;
        other.ix >> shift == self.ix && other.iy >> shift == self.iy
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lod{}({}, {})", self.lod, self.ix, self.iy)
    }
}

impl BlockLayout {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if !(self.block_size > 0.0) || !self.block_size.is_finite() {
            return bad(format!("block_size must be positive, got {}", self.block_size));
        }
        if !(self.z_range[1] > self.z_range[0]) {
            return bad(format!("z_max must exceed z_min, got {:?}", self.z_range));
        }
        if self.lod_count == 0 || self.lod_count > 16 {
            return bad(format!("lod_count must be in 1..=16, got {}", self.lod_count));
        }
        let step = 1u32 << (self.lod_count - 1);
        for n in self.grid_dims {
            if n == 0 || n % step != 0 {
                return bad(format!(
                    "grid dims {:?} must be non-zero multiples of {step}",
                    self.grid_dims
                ));
            }
        }
        Ok(())
    }

    /// Edge length of a block at `lod`.
    pub fn block_extent(&self, lod: u32) -> f64 {
        self.block_size * f64::from(1u32 << (lod - 1))
    }

    /// xy diagonal of a block at `lod`.
    pub fn block_diagonal(&self, lod: u32) -> f64 {
        self.block_extent(lod) * std::f64::consts::SQRT_2
    }

    pub fn dims_at(&self, lod: u32) -> [u32; 2] {
        let shift = lod - 1;
        [self.grid_dims[0] >> shift, self.grid_dims[1] >> shift]
    }

    pub fn block_count(&self, lod: u32) -> usize {
        let [nx, ny] = self.dims_at(lod);
        nx as usize * ny as usize
    }

    /// All blocks at `lod` in (iy, ix) order.
    pub fn blocks(&self, lod: u32) -> impl Iterator<Item = BlockId> {
        let [nx, ny] = self.dims_at(lod);
        (0..ny).flat_map(move |iy| (0..nx).map(move |ix| BlockId::new(lod, ix, iy)))
    }

    pub fn all_blocks(&self) -> impl Iterator<Item = BlockId> + '_ {
        (1..=self.lod_count).flat_map(move |lod| self.blocks(lod))
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        if id.lod == 0 || id.lod > self.lod_count {
            return false;
        }
        let [nx, ny] = self.dims_at(id.lod);
        id.ix < nx && id.iy < ny
    }

    /// True if the block touches the outer edge of the layout.
    pub fn is_border(&self, id: &BlockId) -> bool {
        let [nx, ny] = self.dims_at(id.lod);
        id.ix == 0 || id.iy == 0 || id.ix + 1 == nx || id.iy + 1 == ny
    }

    pub fn domain(&self) -> Rect {
        let min = DVec2::from(self.origin);
        let max = min
            + DVec2::new(
                f64::from(self.grid_dims[0]) * self.block_size,
                f64::from(self.grid_dims[1]) * self.block_size,
            );
        Rect { min, max }
    }

    /// The domain rectangle extruded over the layout's z range.
    pub fn domain_box(&self) -> Aabb {
        let d = self.domain();
        Aabb::new(
            d.min.extend(self.z_range[0]),
            d.max.extend(self.z_range[1]),
        )
    }

    pub fn footprint(&self, id: &BlockId) -> Rect {
        let e = self.block_extent(id.lod);
        let min = DVec2::from(self.origin) + DVec2::new(f64::from(id.ix), f64::from(id.iy)) * e;
        Rect {
            min,
            max: min + DVec2::splat(e),
        }
    }

    pub fn center(&self, id: &BlockId) -> DVec2 {
        self.footprint(id).center()
    }

    pub fn bounds(&self, id: &BlockId) -> Aabb {
        let r = self.footprint(id);
        Aabb::new(
            r.min.extend(self.z_range[0]),
            r.max.extend(self.z_range[1]),
        )
    }

    /// Maps a point to the block whose center is nearest in the L-infinity
    /// norm of the xy projection; z is ignored.
    ///
    /// Points on a shared edge go to the block with the smaller `(iy, ix)`.
    pub fn assign_block(&self, p: DVec3, lod: u32) -> Result<BlockId> {
        let domain = self.domain();
        if lod == 0 || lod > self.lod_count {
            return Err(Error::InvalidLayout(format!("lod {lod} out of range")));
        }
        if !domain.contains(p.truncate()) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        let e = self.block_extent(lod);
        let [nx, ny] = self.dims_at(lod);
        let index = |v: f64, o: f64, n: u32| -> u32 {
            let u = (v - o) / e;
            // Half-open (lo, hi] cells so that boundaries fall to the lower index.
            let i = u.ceil() - 1.0;
            (i.max(0.0) as u32).min(n - 1)
        };
        Ok(BlockId::new(
            lod,
            index(p.x, self.origin[0], nx),
            index(p.y, self.origin[1], ny),
        ))
    }
}
