//! Block-sparse voxel storage: only macroblocks holding an occupied voxel are
//! kept, addressed through a coarse indirection grid.

use super::occupancy::OccupancyGrid;
use super::{Texel, CHANNELS};
use crate::{Error, Result};

/// Macroblock edge length in texels.
pub const MACROBLOCK: u32 = 8;
pub const MACROBLOCK_TEXELS: usize = (MACROBLOCK * MACROBLOCK * MACROBLOCK) as usize;
/// Indirection entry for a macroblock with no stored texels.
pub const EMPTY: u32 = u32::MAX;

/// Dense 3D array of quantized texels, x fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TexelVolume {
    pub dims: [u32; 3],
    pub texels: Vec<Texel>,
}

impl TexelVolume {
    pub fn filled(dims: [u32; 3], value: Texel) -> Self {
        let n = dims.iter().map(|&d| d as usize).product();
        TexelVolume {
            dims,
            texels: vec![value; n],
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, z: u32) -> usize {
        (z as usize * self.dims[1] as usize + y as usize) * self.dims[0] as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, z: u32) -> &Texel {
        &self.texels[self.index(x, y, z)]
    }
}

/// Dense 2D array of quantized texels, first axis fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TexelPlane {
    pub dims: [u32; 2],
    pub texels: Vec<Texel>,
}

impl TexelPlane {
    pub fn filled(dims: [u32; 2], value: Texel) -> Self {
        TexelPlane {
            dims,
            texels: vec![value; dims[0] as usize * dims[1] as usize],
        }
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> &Texel {
        &self.texels[v as usize * self.dims[0] as usize + u as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseAtlas {
    dims: [u32; 3],
    mb_dims: [u32; 3],
    indirection: Vec<u32>,
    /// `macroblock_count * 512` texels; texels of one macroblock are contiguous, x fastest.
    texels: Vec<Texel>,
}

fn macroblock_dims(dims: [u32; 3]) -> Result<[u32; 3]> {
    for d in dims {
        if d == 0 || d % MACROBLOCK != 0 {
            return Err(Error::Indivisible(d, MACROBLOCK));
        }
    }
    Ok(dims.map(|d| d / MACROBLOCK))
}

/// Indirection grid derived from occupancy: occupied macroblocks are numbered
/// in raster order (x fastest).
fn indirection_from(occupancy: &OccupancyGrid, mb: [u32; 3]) -> (Vec<u32>, u32) {
    let mut ind = vec![EMPTY; (mb[0] * mb[1] * mb[2]) as usize];
    let mut next = 0u32;
    let mut i = 0;
    for bz in 0..mb[2] {
        for by in 0..mb[1] {
            for bx in 0..mb[0] {
                let lo = [bx * MACROBLOCK, by * MACROBLOCK, bz * MACROBLOCK];
                if occupancy.any_in(lo, lo.map(|v| v + MACROBLOCK)) {
                    ind[i] = next;
                    next += 1;
                }
                i += 1;
            }
        }
    }
    (ind, next)
}

/// Copies every macroblock containing at least one occupied voxel into a
/// tight atlas; all other macroblocks map to [`EMPTY`].
pub fn pack_atlas(dense: &TexelVolume, occupancy: &OccupancyGrid) -> Result<SparseAtlas> {
    if dense.dims != occupancy.dims() {
        return Err(Error::InvalidConfig(format!(
            "voxel grid {:?} and occupancy {:?} differ in size",
            dense.dims,
            occupancy.dims()
        )));
    }
    let mb = macroblock_dims(dense.dims)?;
    let (indirection, count) = indirection_from(occupancy, mb);
    let mut texels = Vec::with_capacity(count as usize * MACROBLOCK_TEXELS);
    let mut i = 0;
    for bz in 0..mb[2] {
        for by in 0..mb[1] {
            for bx in 0..mb[0] {
                if indirection[i] != EMPTY {
                    for z in 0..MACROBLOCK {
                        for y in 0..MACROBLOCK {
                            for x in 0..MACROBLOCK {
                                texels.push(*dense.get(
                                    bx * MACROBLOCK + x,
                                    by * MACROBLOCK + y,
                                    bz * MACROBLOCK + z,
                                ));
                            }
                        }
                    }
                }
                i += 1;
            }
        }
    }
    Ok(SparseAtlas {
        dims: dense.dims,
        mb_dims: mb,
        indirection,
        texels,
    })
}

impl SparseAtlas {
    /// Rebuilds an atlas from stored texels; the indirection grid is implied by
    /// the occupancy grid.
    pub fn from_parts(occupancy: &OccupancyGrid, texels: Vec<Texel>) -> Result<Self> {
        let dims = occupancy.dims();
        let mb = macroblock_dims(dims)?;
        let (indirection, count) = indirection_from(occupancy, mb);
        if texels.len() != count as usize * MACROBLOCK_TEXELS {
            return Err(Error::InvalidConfig(format!(
                "atlas holds {} texels, occupancy implies {} macroblocks",
                texels.len(),
                count
            )));
        }
        Ok(SparseAtlas {
            dims,
            mb_dims: mb,
            indirection,
            texels,
        })
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn macroblock_dims(&self) -> [u32; 3] {
        self.mb_dims
    }

    pub fn macroblock_count(&self) -> usize {
        self.texels.len() / MACROBLOCK_TEXELS
    }

    pub fn texels(&self) -> &[Texel] {
        &self.texels
    }

    pub fn indirection(&self) -> &[u32] {
        &self.indirection
    }

    /// Texels of the `i`-th stored macroblock.
    pub fn macroblock(&self, i: usize) -> &[Texel] {
        &self.texels[i * MACROBLOCK_TEXELS..(i + 1) * MACROBLOCK_TEXELS]
    }

    #[inline]
    pub fn entry(&self, bx: u32, by: u32, bz: u32) -> u32 {
        self.indirection[((bz * self.mb_dims[1] + by) * self.mb_dims[0] + bx) as usize]
    }

    #[inline]
    pub fn lookup(&self, x: u32, y: u32, z: u32) -> Option<&Texel> {
        let e = self.entry(x / MACROBLOCK, y / MACROBLOCK, z / MACROBLOCK);
        if e == EMPTY {
            return None;
        }
        let local = ((z % MACROBLOCK) * MACROBLOCK + y % MACROBLOCK) * MACROBLOCK + x % MACROBLOCK;
        Some(&self.texels[e as usize * MACROBLOCK_TEXELS + local as usize])
    }

    /// Dense grid with EMPTY regions filled by `fill`.
    pub fn unpack(&self, fill: Texel) -> TexelVolume {
        let mut out = TexelVolume::filled(self.dims, fill);
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    if let Some(t) = self.lookup(x, y, z) {
                        let i = out.index(x, y, z);
                        out.texels[i] = *t;
                    }
                }
            }
        }
        out
    }

    /// Every stored macroblock is referenced exactly once.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.macroblock_count()];
        for &e in &self.indirection {
            if e == EMPTY {
                continue;
            }
            match seen.get_mut(e as usize) {
                Some(s) if !*s => *s = true,
                _ => return false,
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn byte_size(&self) -> usize {
        self.texels.len() * CHANNELS + self.indirection.len() * 4
    }
}
