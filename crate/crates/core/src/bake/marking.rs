//! Occupancy marking from training rays.

use rayon::prelude::*;

use super::grids::BakeConfig;
use super::source::FieldSource;
use crate::geometry::Ray;
use crate::render::march::Lattice;
use crate::render::Camera;
use crate::scene::assets::Stencil;
use crate::scene::{activate, BlockFrame, OccupancyGrid};
use crate::{Error, Result};

/// One ray per pixel of every camera, thinned evenly to at most `budget` rays.
pub fn training_rays(cameras: &[Camera], budget: usize) -> Vec<Ray> {
    let total: usize = cameras
        .iter()
        .map(|c| c.width as usize * c.height as usize)
        .sum();
    let keep = total.min(budget);
    let mut out = Vec::with_capacity(keep);
    if keep == 0 {
        return out;
    }
    let mut next = 0usize;
    let mut index = 0usize;
    for cam in cameras {
        for y in 0..cam.height {
            for x in 0..cam.width {
                // Index k is kept when it is the first index at or after k_j = j * total / keep.
                if index == next * total / keep && out.len() < keep {
                    out.push(cam.ray(x, y));
                    next += 1;
                }
                index += 1;
            }
        }
    }
    out
}

/// Marches every ray through the field inside the block, with transmittance
/// accumulated from the block entry, and marks the eight stencil nodes of
/// each sample whose weight exceeds `tau_w` and opacity exceeds `tau_alpha`.
pub fn bake_occupancy<F: FieldSource + ?Sized>(
    src: &F,
    frame: &BlockFrame,
    cfg: &BakeConfig,
    rays: &[Ray],
) -> Result<OccupancyGrid> {
    if rays.is_empty() {
        return Err(Error::EmptyRaySet);
    }
    let dims = frame.voxel_dims;
    let grid = rays
        .par_chunks(256)
        .fold(
            || OccupancyGrid::new(dims),
            |mut grid, chunk| {
                for ray in chunk {
                    mark_ray(src, frame, cfg, ray, &mut grid);
                }
                grid
            },
        )
        .reduce(
            || OccupancyGrid::new(dims),
            |mut a, b| {
                a.union_with(&b);
                a
            },
        );
    Ok(grid)
}

fn mark_ray<F: FieldSource + ?Sized>(
    src: &F,
    frame: &BlockFrame,
    cfg: &BakeConfig,
    ray: &Ray,
    grid: &mut OccupancyGrid,
) {
    let Some(lattice) = Lattice::new(ray, frame) else {
        return;
    };
    let mut transmittance = 1.0;
    for i in 0..lattice.count {
        let p = ray.at(lattice.t(i));
        let sigma = activate(&src.pre_activations(p)).sigma;
        let alpha = 1.0 - (-sigma * lattice.delta).exp();
        let w = transmittance * alpha;
        if w > cfg.tau_w && alpha > cfg.tau_alpha {
            let stencil = Stencil::at(frame.to_grid(p), frame.voxel_dims);
            for k in 0..8 {
                let ([x, y, z], _) = stencil.corner(k);
                grid.set(x, y, z, true);
            }
        }
        transmittance *= 1.0 - alpha;
        // Every later weight is below the transmittance.
        if transmittance <= cfg.tau_w {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bake::source::ConstantField;
    use crate::geometry::Aabb;
    use crate::scene::{BlockId, CHANNELS};
    use glam::DVec3;

    fn frame() -> BlockFrame {
        BlockFrame::new(
            BlockId::new(1, 0, 0),
            Aabb::new(DVec3::ZERO, DVec3::ONE),
            [16, 16, 16],
            false,
        )
    }

    fn cfg() -> BakeConfig {
        BakeConfig {
            voxel_res: 16,
            triplane_res: 16,
            ..BakeConfig::default()
        }
    }

    /// Opaque slab `z < 0.25` seen from above.
    struct Slab;

    impl FieldSource for Slab {
        fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
            let d = if p.z < 0.25 { 7.0 } else { -9.0 };
            [d, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        }
        fn bounds(&self) -> Aabb {
            Aabb::new(DVec3::ZERO, DVec3::ONE)
        }
    }

    fn down_rays(n: u32) -> Vec<Ray> {
        let mut rays = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let x = (f64::from(i) + 0.5) / f64::from(n);
                let y = (f64::from(j) + 0.5) / f64::from(n);
                rays.push(Ray::towards(DVec3::new(x, y, 2.0), DVec3::new(0.01, 0.02, -1.0)));
            }
        }
        rays
    }

    #[test]
    fn empty_ray_set_is_rejected() {
        assert!(matches!(
            bake_occupancy(&Slab, &frame(), &cfg(), &[]),
            Err(Error::EmptyRaySet)
        ));
    }

    #[test]
    fn zero_density_marks_nothing() {
        let src = ConstantField {
            value: [-10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            bounds: Aabb::new(DVec3::ZERO, DVec3::ONE),
        };
        let g = bake_occupancy(&src, &frame(), &cfg(), &down_rays(16)).unwrap();
        assert_eq!(g.count(), 0);
    }

    #[test]
    fn slab_marks_only_its_skin() {
        let f = frame();
        let g = bake_occupancy(&Slab, &f, &cfg(), &down_rays(32)).unwrap();
        assert!(g.count() > 0);
        // Dense oracle: nodes whose sample would pass the opacity test, dilated by one voxel.
        let delta = f.step();
        let dense = |x: u32, y: u32, z: u32| {
            let p = f.node_position(x, y, z);
            let sigma = activate(&Slab.pre_activations(p)).sigma;
            1.0 - (-sigma * delta).exp() > cfg().tau_alpha
        };
        for [x, y, z] in g.iter_occupied() {
            let mut near = false;
            for dz in -1i32..=1 {
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        let (a, b, c) = (x as i32 + dx, y as i32 + dy, z as i32 + dz);
                        if (0..16).contains(&a) && (0..16).contains(&b) && (0..16).contains(&c) {
                            near |= dense(a as u32, b as u32, c as u32);
                        }
                    }
                }
            }
            assert!(near, "({x}, {y}, {z}) is far from the slab");
            // Opaque slab: nothing below the first opaque layer and its skirt.
            assert!(z >= 2, "({x}, {y}, {z}) lies deep inside the slab");
        }
    }

    #[test]
    fn retained_samples_lie_in_occupied_cells() {
        let f = frame();
        let c = cfg();
        let rays = down_rays(24);
        let g = bake_occupancy(&Slab, &f, &c, &rays).unwrap();
        for ray in &rays {
            let Some(lattice) = Lattice::new(ray, &f) else {
                continue;
            };
            let mut t = 1.0;
            for i in 0..lattice.count {
                let p = ray.at(lattice.t(i));
                let sigma = activate(&Slab.pre_activations(p)).sigma;
                let a = 1.0 - (-sigma * lattice.delta).exp();
                if t * a > c.tau_w && a > c.tau_alpha {
                    let [x, y, z] = f.cell_of(p).unwrap();
                    assert!(g.get(x, y, z));
                }
                t *= 1.0 - a;
            }
        }
    }

    #[test]
    fn tiny_thresholds_cover_all_density_along_rays() {
        // Semi-transparent ball: with near-zero thresholds every sample with
        // density lands in an occupied cell.
        struct Ball;
        impl FieldSource for Ball {
            fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
                let d = if p.distance(DVec3::splat(0.5)) < 0.3 { 0.0 } else { -30.0 };
                [d, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
            }
            fn bounds(&self) -> Aabb {
                Aabb::new(DVec3::ZERO, DVec3::ONE)
            }
        }
        let f = frame();
        let c = BakeConfig {
            tau_w: 1e-9,
            tau_alpha: 1e-9,
            ..cfg()
        };
        let rays = down_rays(32);
        let g = bake_occupancy(&Ball, &f, &c, &rays).unwrap();
        for ray in &rays {
            let Some(lattice) = Lattice::new(ray, &f) else {
                continue;
            };
            for i in 0..lattice.count {
                let p = ray.at(lattice.t(i));
                if p.distance(DVec3::splat(0.5)) < 0.3 {
                    let [x, y, z] = f.cell_of(p).unwrap();
                    assert!(g.get(x, y, z));
                }
            }
        }
    }

    #[test]
    fn ray_thinning() {
        let cam = Camera::look_at(DVec3::new(3.0, 0.0, 0.0), DVec3::ZERO, DVec3::Z, 10, 10, 40.0);
        let cams = vec![cam.clone(), cam];
        assert_eq!(training_rays(&cams, 1000).len(), 200);
        let thin = training_rays(&cams, 50);
        assert_eq!(thin.len(), 50);
        assert_eq!(thin[0], cams[0].ray(0, 0));
    }
}
