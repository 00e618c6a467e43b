//! Binary occupancy grids and their max-pooled pyramid.

use crate::{Error, Result};

/// Dense bit grid, x fastest, then y, then z.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrid {
    dims: [u32; 3],
    bits: Vec<u64>,
}

impl OccupancyGrid {
    pub fn new(dims: [u32; 3]) -> Self {
        let n = dims.iter().map(|&d| d as usize).product::<usize>();
        OccupancyGrid {
            dims,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(dims: [u32; 3]) -> Self {
        let mut g = Self::new(dims);
        for i in 0..g.len() {
            g.bits[i / 64] |= 1 << (i % 64);
        }
        g
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn index(&self, x: u32, y: u32, z: u32) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        (z as usize * self.dims[1] as usize + y as usize) * self.dims[0] as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, z: u32) -> bool {
        let i = self.index(x, y, z);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, z: u32, value: bool) {
        let i = self.index(x, y, z);
        if value {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.count() as f64 / self.len().max(1) as f64
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = [u32; 3]> + '_ {
        let [nx, ny, _] = self.dims;
        (0..self.len()).filter_map(move |i| {
            (self.bits[i / 64] >> (i % 64) & 1 == 1).then(|| {
                let i = i as u32;
                [i % nx, (i / nx) % ny, i / (nx * ny)]
            })
        })
    }

    /// True if any cell in the half-open box `[lo, hi)` is set.
    pub fn any_in(&self, lo: [u32; 3], hi: [u32; 3]) -> bool {
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    if self.get(x, y, z) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Bitwise OR with a grid of identical dimensions.
    pub fn union_with(&mut self, other: &OccupancyGrid) {
        assert_eq!(self.dims, other.dims);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Packed bytes, one bit per cell, least significant bit first.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(n.div_ceil(8));
        out
    }

    pub fn from_packed_bytes(dims: [u32; 3], bytes: &[u8]) -> Option<Self> {
        let mut g = Self::new(dims);
        let n = g.len();
        if bytes.len() != n.div_ceil(8) {
            return None;
        }
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            g.bits[i] = u64::from_le_bytes(word);
        }
        // Padding bits past the last cell must be clear.
        if n % 64 != 0 && g.bits.last().is_some_and(|w| w >> (n % 64) != 0) {
            return None;
        }
        Some(g)
    }
}

/// 2x max-pool: a parent cell is occupied iff any of its 8 children is.
pub fn maxpool_occupancy(grid: &OccupancyGrid) -> Result<OccupancyGrid> {
    let dims = grid.dims();
    for d in dims {
        if d % 2 != 0 {
            return Err(Error::Indivisible(d, 2));
        }
    }
    let mut out = OccupancyGrid::new(dims.map(|d| d / 2));
    for [x, y, z] in grid.iter_occupied() {
        out.set(x / 2, y / 2, z / 2, true);
    }
    Ok(out)
}

/// Level 0 at voxel resolution, each further level max-pooled by 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyPyramid {
    levels: Vec<OccupancyGrid>,
}

impl OccupancyPyramid {
    pub fn build(level0: OccupancyGrid, level_count: u32) -> Result<Self> {
        if level_count == 0 {
            return Err(Error::InvalidConfig("pyramid needs at least one level".into()));
        }
        let mut levels = vec![level0];
        for _ in 1..level_count {
            let next = maxpool_occupancy(levels.last().unwrap())?;
            levels.push(next);
        }
        Ok(OccupancyPyramid { levels })
    }

    pub fn from_levels(levels: Vec<OccupancyGrid>) -> Result<Self> {
        let p = OccupancyPyramid { levels };
        if p.levels.is_empty() {
            return Err(Error::InvalidConfig("pyramid needs at least one level".into()));
        }
        for w in p.levels.windows(2) {
            if w[1].dims() != w[0].dims().map(|d| d / 2) {
                return Err(Error::InvalidConfig("pyramid levels are not halved".into()));
            }
        }
        Ok(p)
    }

    pub fn levels(&self) -> &[OccupancyGrid] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &OccupancyGrid {
        &self.levels[i]
    }

    pub fn level0(&self) -> &OccupancyGrid {
        &self.levels[0]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Checks that every occupied cell has an occupied parent.
    pub fn is_conservative(&self) -> bool {
        self.levels.windows(2).all(|w| {
            w[0].iter_occupied()
                .all(|[x, y, z]| w[1].get(x / 2, y / 2, z / 2))
        })
    }

    const MAGIC: &'static [u8; 4] = b"BFOC";
    const VERSION: u32 = 1;

    /// Binary layout: magic `BFOC`, u32 version, u32 level count, then per
    /// level three u32 dims followed by the packed bits. All integers little endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(self.levels.len() as u32).to_le_bytes());
        for level in &self.levels {
            for d in level.dims() {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.extend_from_slice(&level.to_packed_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = bytes;
        let mut take = |n: usize| -> std::result::Result<&[u8], String> {
            if cur.len() < n {
                return Err("truncated occupancy data".into());
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        if take(4)? != Self::MAGIC {
            return Err("bad occupancy magic".into());
        }
        let version = u32_at(take(4)?);
        if version != Self::VERSION {
            return Err(format!("unsupported occupancy version {version}"));
        }
        let count = u32_at(take(4)?);
        let mut levels = Vec::new();
        for _ in 0..count {
            let dims = [u32_at(take(4)?), u32_at(take(4)?), u32_at(take(4)?)];
            let n = dims.iter().map(|&d| d as usize).product::<usize>();
            let grid = OccupancyGrid::from_packed_bytes(dims, take(n.div_ceil(8))?)
                .ok_or("corrupt occupancy bits")?;
            levels.push(grid);
        }
        if !cur.is_empty() {
            return Err("trailing bytes after occupancy data".into());
        }
        let p = Self::from_levels(levels).map_err(|e| e.to_string())?;
        if !p.is_conservative() {
            return Err("occupancy pyramid is not conservative".into());
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_grid(dims: [u32; 3], fill: &[bool]) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(dims);
        let mut i = 0;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    g.set(x, y, z, fill[i % fill.len()]);
                    i += 1;
                }
            }
        }
        g
    }

    #[test]
    fn empty_pools_to_empty() {
        let g = OccupancyGrid::new([8, 8, 4]);
        let p = maxpool_occupancy(&g).unwrap();
        assert_eq!(p.dims(), [4, 4, 2]);
        assert_eq!(p.count(), 0);
    }

    #[test]
    fn single_child_gives_single_parent() {
        let mut g = OccupancyGrid::new([8, 8, 8]);
        g.set(5, 2, 7, true);
        let p = maxpool_occupancy(&g).unwrap();
        assert_eq!(p.count(), 1);
        assert!(p.get(2, 1, 3));
    }

    #[test]
    fn odd_resolution_is_rejected() {
        assert!(matches!(
            maxpool_occupancy(&OccupancyGrid::new([8, 7, 8])),
            Err(Error::Indivisible(7, 2))
        ));
    }

    proptest! {
        #[test]
        fn pool_matches_brute_force(fill in proptest::collection::vec(proptest::bool::weighted(0.05), 1..600)) {
            let g = random_grid([8, 6, 4], &fill);
            let p = maxpool_occupancy(&g).unwrap();
            let mut expected = 0;
            for z in 0..2 { for y in 0..3 { for x in 0..4 {
                let any = (0..8).any(|k| g.get(2 * x + (k & 1), 2 * y + (k >> 1 & 1), 2 * z + (k >> 2)));
                prop_assert_eq!(p.get(x, y, z), any);
                expected += any as usize;
            }}}
            prop_assert_eq!(p.count(), expected);

            let pyr = OccupancyPyramid::build(g.clone(), 2).unwrap();
            prop_assert!(pyr.is_conservative());
            let back = OccupancyPyramid::from_bytes(&pyr.to_bytes()).unwrap();
            prop_assert_eq!(back, pyr);
        }
    }

    #[test]
    fn packed_bytes_reject_dirty_padding() {
        let g = OccupancyGrid::full([3, 1, 1]);
        let mut bytes = g.to_packed_bytes();
        assert_eq!(bytes, vec![0b111]);
        bytes[0] |= 0b1000;
        assert!(OccupancyGrid::from_packed_bytes([3, 1, 1], &bytes).is_none());
    }
}
