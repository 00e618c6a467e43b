//! Dense sampling of a field onto a block's voxel and plane grids, and
//! quantization into block assets.

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::source::FieldSource;
use crate::scene::assets::{sample_planes, PLANE_AXES};
use crate::scene::{
    pack_atlas, BlockAssets, BlockFrame, BlockId, BlockLayout, OccupancyGrid, OccupancyPyramid,
    QuantizationSpec, TexelPlane, TexelVolume, CHANNELS, MACROBLOCK,
};
use crate::{Error, Result};

/// Most samples averaged along the collapsed axis of a plane.
const PLANE_DEPTH_SAMPLES: u32 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakeConfig {
    pub voxel_res: u32,
    pub triplane_res: u32,
    /// Weight threshold for occupancy marking.
    pub tau_w: f64,
    /// Opacity threshold for occupancy marking.
    pub tau_alpha: f64,
    /// Most training rays used for occupancy marking.
    pub ray_budget: usize,
    pub pyramid_levels: u32,
    pub quantization: QuantizationSpec,
    /// Fraction of the signal stored in the planes.
    pub plane_share: f64,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            voxel_res: 64,
            triplane_res: 256,
            tau_w: 0.005,
            tau_alpha: 0.005,
            ray_budget: 1 << 18,
            pyramid_levels: 3,
            quantization: QuantizationSpec::default(),
            plane_share: 0.0,
        }
    }
}

impl BakeConfig {
    /// Checks the configuration against a layout with `lod_count` levels.
    pub fn validate(&self, lod_count: u32) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [("voxel_res", self.voxel_res), ("triplane_res", self.triplane_res)] {
            if !v.is_power_of_two() {
                return bad(format!("{name} must be a power of two, got {v}"));
            }
        }
        for (name, v) in [("tau_w", self.tau_w), ("tau_alpha", self.tau_alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.plane_share) {
            return bad(format!("plane_share must lie in [0, 1], got {}", self.plane_share));
        }
        if self.ray_budget == 0 {
            return Err(Error::EmptyRaySet);
        }
        self.quantization.validate()?;
        let min_depth = MACROBLOCK.max(1 << (self.pyramid_levels - 1));
        let coarsest = self.voxel_res >> (lod_count.max(1) - 1);
        if coarsest < min_depth {
            return bad(format!(
                "voxel_res {} leaves {coarsest} voxels along z at LOD {lod_count}; need {min_depth}",
                self.voxel_res
            ));
        }
        if self.triplane_res >> (lod_count.max(1) - 1) == 0 {
            return bad(format!("triplane_res {} is too small", self.triplane_res));
        }
        Ok(())
    }

    /// Voxel dims at a LOD: xy keep the resolution, z halves per level.
    pub fn voxel_dims(&self, lod: u32) -> [u32; 3] {
        [self.voxel_res, self.voxel_res, self.voxel_res >> (lod - 1)]
    }

    /// Plane dims at a LOD, in xy, xz, yz order.
    pub fn plane_dims(&self, lod: u32) -> [[u32; 2]; 3] {
        let t = self.triplane_res;
        let tz = (t >> (lod - 1)).max(1);
        [[t, t], [t, tz], [t, tz]]
    }

    pub fn frame(&self, layout: &BlockLayout, id: BlockId, unbounded: bool) -> BlockFrame {
        BlockFrame::new(id, layout.bounds(&id), self.voxel_dims(id.lod), unbounded)
    }
}

/// Unquantized pre-activations on a block's grids. Voxels are x-fastest.
#[derive(Clone, Debug)]
pub struct DenseGrids {
    pub frame: BlockFrame,
    pub voxels: Vec<[f64; CHANNELS]>,
    pub plane_dims: [[u32; 2]; 3],
    pub planes: [Vec<[f64; CHANNELS]>; 3],
}

fn eval<F: FieldSource + ?Sized>(src: &F, p: DVec3) -> Result<[f64; CHANNELS]> {
    let v = src.pre_activations(p);
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFiniteField {
            x: p.x,
            y: p.y,
            z: p.z,
        })
    }
}

/// Samples the field at every voxel node and builds the plane grids. With a
/// non-zero plane share each plane holds `share / 3` of the field averaged
/// along its collapsed axis; otherwise the planes are zero.
pub fn sample_field_to_grids<F: FieldSource + ?Sized>(
    src: &F,
    frame: &BlockFrame,
    plane_dims: [[u32; 2]; 3],
    plane_share: f64,
) -> Result<DenseGrids> {
    let [nx, ny, nz] = frame.voxel_dims;
    let voxels: Vec<[f64; CHANNELS]> = (0..nz)
        .into_par_iter()
        .map(|z| {
            let mut slab = Vec::with_capacity((nx * ny) as usize);
            for y in 0..ny {
                for x in 0..nx {
                    slab.push(eval(src, frame.node_position(x, y, z))?);
                }
            }
            Ok(slab)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let planes = try_array3(|j| {
        let [w, h] = plane_dims[j];
        let axes = PLANE_AXES[j];
        let depth_axis = 3 - axes[0] - axes[1];
        let mut out = vec![[0.0; CHANNELS]; (w * h) as usize];
        if plane_share == 0.0 {
            return Ok(out);
        }
        let n = PLANE_DEPTH_SAMPLES.min(frame.voxel_dims[depth_axis]);
        let scale = plane_share / 3.0 / f64::from(n);
        for v in 0..h {
            for u in 0..w {
                let mut unit = DVec3::ZERO;
                unit[axes[0]] = (f64::from(u) + 0.5) / f64::from(w);
                unit[axes[1]] = (f64::from(v) + 0.5) / f64::from(h);
                let acc = &mut out[(v * w + u) as usize];
                for k in 0..n {
                    unit[depth_axis] = (f64::from(k) + 0.5) / f64::from(n);
                    let val = eval(src, frame.from_unit(unit))?;
                    for (a, b) in acc.iter_mut().zip(val) {
                        *a += scale * b;
                    }
                }
            }
        }
        Ok(out)
    })?;

    Ok(DenseGrids {
        frame: frame.clone(),
        voxels,
        plane_dims,
        planes,
    })
}

fn try_array3<T>(mut f: impl FnMut(usize) -> Result<T>) -> Result<[T; 3]> {
    Ok([f(0)?, f(1)?, f(2)?])
}

/// Quantizes the planes, then stores in the voxels what the dequantized
/// planes leave unexplained, so that nodes reconstruct the field up to one
/// quantization step.
pub fn quantize_grids(
    grids: &DenseGrids,
    quant: &QuantizationSpec,
    occupancy: OccupancyGrid,
    pyramid_levels: u32,
) -> Result<BlockAssets> {
    let frame = &grids.frame;
    if occupancy.dims() != frame.voxel_dims {
        return Err(Error::InvalidConfig(format!(
            "occupancy dims {:?} differ from voxel dims {:?}",
            occupancy.dims(),
            frame.voxel_dims
        )));
    }
    let planes: [TexelPlane; 3] = [0, 1, 2].map(|j| TexelPlane {
        dims: grids.plane_dims[j],
        texels: grids.planes[j].iter().map(|v| quant.quantize_texel(v)).collect(),
    });
    let table = quant.table();
    let [nx, ny, _] = frame.voxel_dims;
    let dims_f = frame.dims_f();
    let texels = grids
        .voxels
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let i = i as u32;
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            let unit = (DVec3::new(f64::from(x), f64::from(y), f64::from(z)) + 0.5) / dims_f;
            let mut plane = [0.0; CHANNELS];
            sample_planes(&planes, &table, unit, &mut plane);
            let residual: [f64; CHANNELS] = std::array::from_fn(|c| v[c] - plane[c]);
            quant.quantize_texel(&residual)
        })
        .collect();
    let dense = TexelVolume {
        dims: frame.voxel_dims,
        texels,
    };
    let atlas = pack_atlas(&dense, &occupancy)?;
    let pyramid = OccupancyPyramid::build(occupancy, pyramid_levels)?;
    BlockAssets::new(frame.clone(), quant.clone(), atlas, planes, pyramid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bake::source::ConstantField;
    use crate::geometry::Aabb;

    struct RampX;

    impl FieldSource for RampX {
        fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
            let r = 8.0 * p.x - 4.0;
            [r, r, -r, 0.5 * r, r, 0.0, 1.0, -1.0]
        }
        fn bounds(&self) -> Aabb {
            Aabb::new(DVec3::ZERO, DVec3::ONE)
        }
    }

    fn frame() -> BlockFrame {
        BlockFrame::new(
            BlockId::new(1, 0, 0),
            Aabb::new(DVec3::ZERO, DVec3::ONE),
            [16, 16, 16],
            false,
        )
    }

    fn check_vertices<F: FieldSource>(src: &F, share: f64) {
        let f = frame();
        let grids = sample_field_to_grids(src, &f, [[32, 32], [32, 32], [32, 32]], share).unwrap();
        let quant = QuantizationSpec::default();
        let assets = quantize_grids(&grids, &quant, OccupancyGrid::full(f.voxel_dims), 3).unwrap();
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let p = f.node_position(x, y, z);
                    let got = assets.query_pre_activations(p).unwrap();
                    let want = src.pre_activations(p);
                    for c in 0..CHANNELS {
                        let tol = quant.step(c) * 0.5 + 1e-9;
                        assert!(
                            (got[c] - want[c]).abs() <= tol,
                            "channel {c} at {p}: {} vs {}",
                            got[c],
                            want[c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn constant_field_gives_constant_grids() {
        let src = ConstantField {
            value: [1.0, 0.5, -0.5, 2.0, 0.0, 0.1, 0.2, 0.3],
            bounds: Aabb::new(DVec3::ZERO, DVec3::ONE),
        };
        let g = sample_field_to_grids(&src, &frame(), [[8, 8], [8, 8], [8, 8]], 0.0).unwrap();
        assert!(g.voxels.iter().all(|v| *v == src.value));
        assert!(g.planes.iter().flatten().all(|v| *v == [0.0; CHANNELS]));
        check_vertices(&src, 0.0);
    }

    #[test]
    fn vertices_reconstruct_without_planes() {
        check_vertices(&RampX, 0.0);
    }

    #[test]
    fn vertices_reconstruct_with_half_plane_share() {
        let f = frame();
        let g = sample_field_to_grids(&RampX, &f, [[32, 32], [32, 32], [32, 32]], 0.5).unwrap();
        // The xy and xz planes carry the ramp; yz sees only its mean.
        let xy = &g.planes[0];
        assert!((xy[31][0] - xy[0][0]).abs() > 1.0);
        let yz = &g.planes[2];
        assert!((yz[31 * 32][0] - yz[0][0]).abs() < 1e-12);
        check_vertices(&RampX, 0.5);
    }

    #[test]
    fn non_finite_field_names_the_point() {
        struct Bad;
        impl FieldSource for Bad {
            fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
                let v = if p.x > 0.5 { f64::NAN } else { 0.0 };
                [v; CHANNELS]
            }
            fn bounds(&self) -> Aabb {
                Aabb::new(DVec3::ZERO, DVec3::ONE)
            }
        }
        let err = sample_field_to_grids(&Bad, &frame(), [[8, 8]; 3], 0.0).unwrap_err();
        match err {
            Error::NonFiniteField { x, .. } => assert!(x > 0.5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn config_validation() {
        let c = BakeConfig::default();
        c.validate(3).unwrap();
        assert!(BakeConfig { voxel_res: 48, ..c.clone() }.validate(1).is_err());
        assert!(BakeConfig { tau_w: 0.0, ..c.clone() }.validate(1).is_err());
        assert!(BakeConfig { voxel_res: 16, ..c.clone() }.validate(3).is_err());
        assert_eq!(c.voxel_dims(3), [64, 64, 16]);
        assert_eq!(c.plane_dims(2), [[256, 256], [256, 128], [256, 128]]);
    }
}
