//! Per-block baked attribute storage and point queries.

use glam::DVec3;

use super::atlas::{SparseAtlas, TexelPlane, EMPTY, MACROBLOCK};
use super::contract::{contract, uncontract};
use super::occupancy::OccupancyPyramid;
use super::quant::{DequantTable, QuantizationSpec};
use super::{BlockId, Texel, CHANNELS};
use crate::geometry::Aabb;
use crate::{Error, Result};

/// Upper clamp on activated density.
pub const SIGMA_MAX: f64 = 1e4;

/// Plane axis pairs in storage order: xy, xz, yz.
pub const PLANE_AXES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];
pub const PLANE_NAMES: [&str; 3] = ["xy", "xz", "yz"];

/// Activated attributes at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Attributes {
    pub sigma: f64,
    pub diffuse: DVec3,
    pub feature: [f64; 4],
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Channel 0 through `exp` (clamped to `[0, SIGMA_MAX]`), the rest through the logistic sigmoid.
pub fn activate(pre: &[f64; CHANNELS]) -> Attributes {
    Attributes {
        sigma: pre[0].exp().clamp(0.0, SIGMA_MAX),
        diffuse: DVec3::new(sigmoid(pre[1]), sigmoid(pre[2]), sigmoid(pre[3])),
        feature: [
            sigmoid(pre[4]),
            sigmoid(pre[5]),
            sigmoid(pre[6]),
            sigmoid(pre[7]),
        ],
    }
}

/// Geometry of one block's voxel grid.
///
/// Grid nodes sit at texel centers: node `i` along an axis is at
/// `(i + 0.5) / dims` of the grid box. Bounded blocks map their box onto the
/// grid affinely. Unbounded blocks normalize points against the block box,
/// contract them, and let the grid span the contracted cube `[-2, 2]^3`; the
/// box itself is the identity region of the contraction, so inside the box the
/// map is still affine.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFrame {
    pub id: BlockId,
    pub bounds: Aabb,
    pub voxel_dims: [u32; 3],
    pub unbounded: bool,
}

impl BlockFrame {
    pub fn new(id: BlockId, bounds: Aabb, voxel_dims: [u32; 3], unbounded: bool) -> Self {
        BlockFrame {
            id,
            bounds,
            voxel_dims,
            unbounded,
        }
    }

    /// World-space box covered by the grid inside the block box.
    pub fn grid_box(&self) -> Aabb {
        if self.unbounded {
            let c = self.bounds.center();
            let h = self.bounds.size() * 0.5;
            Aabb::new(c - 2.0 * h, c + 2.0 * h)
        } else {
            self.bounds
        }
    }

    pub fn dims_f(&self) -> DVec3 {
        DVec3::new(
            f64::from(self.voxel_dims[0]),
            f64::from(self.voxel_dims[1]),
            f64::from(self.voxel_dims[2]),
        )
    }

    /// World-space voxel edge lengths (inside the block box).
    pub fn voxel_size(&self) -> DVec3 {
        self.grid_box().size() / self.dims_f()
    }

    /// Ray-march step: the smallest voxel edge.
    pub fn step(&self) -> f64 {
        self.voxel_size().min_element()
    }

    /// Normalized grid coordinates in `[0, 1]^3`.
    #[inline]
    pub fn to_unit(&self, p: DVec3) -> DVec3 {
        if self.unbounded {
            let c = self.bounds.center();
            let h = self.bounds.size() * 0.5;
            (contract((p - c) / h) + 2.0) * 0.25
        } else {
            (p - self.bounds.min) / self.bounds.size()
        }
    }

    /// Continuous voxel coordinates in `[0, dims]`.
    #[inline]
    pub fn to_grid(&self, p: DVec3) -> DVec3 {
        self.to_unit(p) * self.dims_f()
    }

    /// World position of a point given in normalized grid coordinates.
    pub fn from_unit(&self, u: DVec3) -> DVec3 {
        if self.unbounded {
            let c = self.bounds.center();
            let h = self.bounds.size() * 0.5;
            c + h * uncontract(u * 4.0 - 2.0)
        } else {
            self.bounds.min + u * self.bounds.size()
        }
    }

    pub fn node_position(&self, x: u32, y: u32, z: u32) -> DVec3 {
        let u = (DVec3::new(f64::from(x), f64::from(y), f64::from(z)) + 0.5) / self.dims_f();
        self.from_unit(u)
    }

    /// Level-0 cell containing `p`, if inside the grid.
    #[inline]
    pub fn cell_of(&self, p: DVec3) -> Option<[u32; 3]> {
        let g = self.to_grid(p);
        let mut out = [0u32; 3];
        for a in 0..3 {
            let d = self.voxel_dims[a];
            // Accept floor(g) in [-1, d]; truncation equals floor once clamped at 0.
            if !(g[a] >= -1.0 && g[a] < f64::from(d) + 1.0) {
                return None;
            }
            // Points on the far face belong to the last cell.
            out[a] = ((g[a].max(0.0)) as u32).min(d - 1);
        }
        Some(out)
    }
}

/// Trilinear stencil of a point: base node, upper node, and weights along each axis.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub lo: [u32; 3],
    pub hi: [u32; 3],
    pub frac: [f64; 3],
}

impl Stencil {
    #[inline]
    pub fn at(g: DVec3, dims: [u32; 3]) -> Self {
        let mut lo = [0u32; 3];
        let mut hi = [0u32; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let u = g[a] - 0.5;
            let max = dims[a] - 1;
            let base = u.floor();
            let i0 = if base < 0.0 { 0 } else { (base as u32).min(max) };
            lo[a] = i0;
            hi[a] = (i0 + 1).min(max);
            frac[a] = (u - f64::from(i0)).clamp(0.0, 1.0);
        }
        Stencil { lo, hi, frac }
    }

    #[inline]
    pub fn corner(&self, k: usize) -> ([u32; 3], f64) {
        let mut idx = [0u32; 3];
        let mut w = 1.0;
        for a in 0..3 {
            if k >> a & 1 == 1 {
                idx[a] = self.hi[a];
                w *= self.frac[a];
            } else {
                idx[a] = self.lo[a];
                w *= 1.0 - self.frac[a];
            }
        }
        (idx, w)
    }
}

/// Baked representation of one block: sparse voxel atlas, three feature
/// planes, and the occupancy pyramid.
#[derive(Clone, Debug)]
pub struct BlockAssets {
    pub frame: BlockFrame,
    pub quant: QuantizationSpec,
    pub atlas: SparseAtlas,
    /// xy, xz, yz.
    pub planes: [TexelPlane; 3],
    pub occupancy: OccupancyPyramid,
    table: DequantTable,
}

impl PartialEq for BlockAssets {
    fn eq(&self, other: &Self) -> bool {
        self.frame == other.frame
            && self.quant == other.quant
            && self.atlas == other.atlas
            && self.planes == other.planes
            && self.occupancy == other.occupancy
    }
}

impl BlockAssets {
    pub fn new(
        frame: BlockFrame,
        quant: QuantizationSpec,
        atlas: SparseAtlas,
        planes: [TexelPlane; 3],
        occupancy: OccupancyPyramid,
    ) -> Result<Self> {
        quant.validate()?;
        if atlas.dims() != frame.voxel_dims || occupancy.level0().dims() != frame.voxel_dims {
            return Err(Error::InvalidConfig(format!(
                "block {}: atlas {:?} / occupancy {:?} do not match voxel dims {:?}",
                frame.id,
                atlas.dims(),
                occupancy.level0().dims(),
                frame.voxel_dims
            )));
        }
        if !atlas.is_well_formed() {
            return Err(Error::InvalidConfig(format!(
                "block {}: atlas macroblocks are aliased",
                frame.id
            )));
        }
        for [x, y, z] in occupancy.level0().iter_occupied() {
            if atlas.entry(x / MACROBLOCK, y / MACROBLOCK, z / MACROBLOCK) == EMPTY {
                return Err(Error::InvalidConfig(format!(
                    "block {}: occupied voxel ({x}, {y}, {z}) has no atlas storage",
                    frame.id
                )));
            }
        }
        let table = quant.table();
        Ok(BlockAssets {
            frame,
            quant,
            atlas,
            planes,
            occupancy,
            table,
        })
    }

    pub fn id(&self) -> BlockId {
        self.frame.id
    }

    pub fn plane_dims(&self) -> [[u32; 2]; 3] {
        [self.planes[0].dims, self.planes[1].dims, self.planes[2].dims]
    }

    /// Height of the highest occupied voxel center, or `z_min` if nothing is occupied.
    pub fn z_top(&self) -> f64 {
        let level0 = self.occupancy.level0();
        let top = level0.iter_occupied().map(|[_, _, z]| z).max();
        match top {
            Some(z) => self
                .frame
                .node_position(0, 0, z)
                .z
                .clamp(self.frame.bounds.min.z, self.frame.bounds.max.z),
            None => self.frame.bounds.min.z,
        }
    }

    /// Bytes held in memory by the quantized data.
    pub fn byte_size(&self) -> usize {
        self.atlas.byte_size()
            + self.planes.iter().map(|p| p.texels.len() * CHANNELS).sum::<usize>()
            + self
                .occupancy
                .levels()
                .iter()
                .map(|l| l.len().div_ceil(8))
                .sum::<usize>()
    }

    /// Interpolated pre-activation values, or `None` if every voxel in the
    /// trilinear neighborhood is EMPTY.
    ///
    /// EMPTY nodes that share a stencil with stored ones contribute the
    /// density floor; the other channels are interpolated over stored nodes only.
    pub fn query_pre_activations(&self, p: DVec3) -> Option<[f64; CHANNELS]> {
        let unit = self.frame.to_unit(p);
        let g = unit * self.frame.dims_f();
        let stencil = Stencil::at(g, self.frame.voxel_dims);

        let lo_mb = stencil.lo.map(|v| v / MACROBLOCK);
        let hi_mb = stencil.hi.map(|v| v / MACROBLOCK);
        if lo_mb == hi_mb && self.atlas.entry(lo_mb[0], lo_mb[1], lo_mb[2]) == EMPTY {
            return None;
        }

        let mut voxel = [0.0; CHANNELS];
        let mut stored_weight = 0.0;
        let mut any = false;
        let density_floor = self.quant.ranges[0][0];
        for k in 0..8 {
            let (idx, w) = stencil.corner(k);
            match self.atlas.lookup(idx[0], idx[1], idx[2]) {
                Some(t) => {
                    any = true;
                    stored_weight += w;
                    for (ch, v) in voxel.iter_mut().enumerate() {
                        *v += w * self.table.get(ch, t[ch]);
                    }
                }
                None => voxel[0] += w * density_floor,
            }
        }
        if !any {
            return None;
        }
        if stored_weight > 0.0 && stored_weight < 1.0 {
            let scale = 1.0 / stored_weight;
            for v in voxel.iter_mut().skip(1) {
                *v *= scale;
            }
        }
        sample_planes(&self.planes, &self.table, unit, &mut voxel);
        Some(voxel)
    }

    /// Activated density, diffuse color and specular feature at `p`. EMPTY
    /// regions return all zeros.
    pub fn query_attributes(&self, p: DVec3) -> Attributes {
        match self.query_pre_activations(p) {
            Some(pre) => activate(&pre),
            None => Attributes::default(),
        }
    }

    /// Stored texel of a voxel node, if its macroblock is stored.
    pub fn voxel_texel(&self, x: u32, y: u32, z: u32) -> Option<&Texel> {
        self.atlas.lookup(x, y, z)
    }
}

/// Adds the bilinear samples of the three planes at normalized grid
/// coordinates `unit` to `out`.
#[inline]
pub fn sample_planes(
    planes: &[TexelPlane; 3],
    table: &DequantTable,
    unit: DVec3,
    out: &mut [f64; CHANNELS],
) {
    for (plane, axes) in planes.iter().zip(PLANE_AXES) {
        let [w, h] = plane.dims;
        let gu = unit[axes[0]] * f64::from(w) - 0.5;
        let gv = unit[axes[1]] * f64::from(h) - 0.5;
        let (u0, u1, fu) = bilinear_axis(gu, w);
        let (v0, v1, fv) = bilinear_axis(gv, h);
        let taps = [
            (plane.get(u0, v0), (1.0 - fu) * (1.0 - fv)),
            (plane.get(u1, v0), fu * (1.0 - fv)),
            (plane.get(u0, v1), (1.0 - fu) * fv),
            (plane.get(u1, v1), fu * fv),
        ];
        for (t, w) in taps {
            for (ch, o) in out.iter_mut().enumerate() {
                *o += w * table.get(ch, t[ch]);
            }
        }
    }
}

#[inline]
fn bilinear_axis(g: f64, n: u32) -> (u32, u32, f64) {
    let max = n - 1;
    let base = g.floor();
    let i0 = if base < 0.0 { 0 } else { (base as u32).min(max) };
    (i0, (i0 + 1).min(max), (g - f64::from(i0)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::atlas::{pack_atlas, TexelVolume};
    use crate::scene::occupancy::OccupancyGrid;

    fn frame(dims: [u32; 3]) -> BlockFrame {
        BlockFrame::new(
            BlockId::new(1, 0, 0),
            Aabb::new(DVec3::ZERO, DVec3::ONE),
            dims,
            false,
        )
    }

    fn uniform_assets(voxel: Texel, plane: Texel, occupied: bool) -> BlockAssets {
        let dims = [16, 16, 16];
        let dense = TexelVolume::filled(dims, voxel);
        let occ = if occupied {
            OccupancyGrid::full(dims)
        } else {
            OccupancyGrid::new(dims)
        };
        let atlas = pack_atlas(&dense, &occ).unwrap();
        let planes = std::array::from_fn(|_| TexelPlane::filled([32, 32], plane));
        BlockAssets::new(
            frame(dims),
            QuantizationSpec::default(),
            atlas,
            planes,
            OccupancyPyramid::build(occ, 3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn empty_region_returns_zeros() {
        let a = uniform_assets([200; 8], [128; 8], false);
        assert_eq!(a.query_attributes(DVec3::splat(0.5)), Attributes::default());
    }

    #[test]
    fn constant_field_is_reproduced() {
        let voxel = [140, 180, 60, 128, 10, 250, 128, 90];
        let plane = [120, 129, 127, 140, 128, 128, 100, 150];
        let a = uniform_assets(voxel, plane, true);
        let q = QuantizationSpec::default();
        let pre: [f64; 8] = std::array::from_fn(|ch| {
            q.dequantize(voxel[ch], ch) + 3.0 * q.dequantize(plane[ch], ch)
        });
        for p in [
            DVec3::new(0.5, 0.5, 0.5),
            DVec3::new(0.01, 0.99, 0.3),
            DVec3::new(0.77, 0.12, 0.999),
        ] {
            let got = a.query_attributes(p);
            assert!((got.sigma - pre[0].exp()).abs() < 1e-9 * pre[0].exp());
            assert!((got.diffuse.x - sigmoid(pre[1])).abs() < 1e-12);
            assert!((got.diffuse.y - sigmoid(pre[2])).abs() < 1e-12);
            assert!((got.feature[3] - sigmoid(pre[7])).abs() < 1e-12);
        }
    }

    #[test]
    fn node_positions_return_node_values() {
        let dims = [16, 16, 8];
        let mut dense = TexelVolume::filled(dims, [0; 8]);
        for (i, t) in dense.texels.iter_mut().enumerate() {
            *t = [(i % 251) as u8, (i % 13) as u8, 0, 0, 0, 0, 0, 0];
        }
        let occ = OccupancyGrid::full(dims);
        let f = frame(dims);
        let a = BlockAssets::new(
            f.clone(),
            QuantizationSpec::default(),
            pack_atlas(&dense, &occ).unwrap(),
            std::array::from_fn(|_| TexelPlane::filled([4, 4], [0; 8])),
            OccupancyPyramid::build(occ, 2).unwrap(),
        )
        .unwrap();
        let q = QuantizationSpec::default();
        let plane_floor: [f64; 8] = std::array::from_fn(|ch| 3.0 * q.dequantize(0, ch));
        for (x, y, z) in [(0, 0, 0), (5, 9, 3), (15, 15, 7)] {
            let pre = a.query_pre_activations(f.node_position(x, y, z)).unwrap();
            let t = dense.get(x, y, z);
            assert!((pre[0] - (q.dequantize(t[0], 0) + plane_floor[0])).abs() < 1e-9);
            assert!((pre[1] - (q.dequantize(t[1], 1) + plane_floor[1])).abs() < 1e-9);
        }
    }

    #[test]
    fn unaliased_atlas_is_required() {
        let dims = [8, 8, 8];
        let dense = TexelVolume::filled(dims, [1; 8]);
        let occ = OccupancyGrid::full(dims);
        let atlas = pack_atlas(&dense, &OccupancyGrid::new(dims)).unwrap();
        let err = BlockAssets::new(
            frame(dims),
            QuantizationSpec::default(),
            atlas,
            std::array::from_fn(|_| TexelPlane::filled([4, 4], [0; 8])),
            OccupancyPyramid::build(occ, 1).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn unbounded_frame_is_identity_inside_box() {
        let mut f = frame([16, 16, 16]);
        f.unbounded = true;
        let p = DVec3::new(0.3, 0.6, 0.9);
        let u = f.to_unit(p);
        // Box maps to the middle half of the grid.
        assert!((u - (DVec3::splat(0.25) + p * 0.5)).length() < 1e-12);
        let far = DVec3::new(40.0, 0.5, 0.5);
        let uf = f.to_unit(far);
        assert!(uf.x < 1.0 && uf.x > 0.99);
        assert!((f.from_unit(uf) - far).length() < 1e-6);
    }
}
