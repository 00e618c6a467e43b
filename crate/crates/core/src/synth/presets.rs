//! Built-in fixture scenes. Every preset takes the finest grid size, the LOD
//! count and a seed, and uses unit blocks.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::{Primitive, SceneSpec, ShadingSpec, Shape};
use super::path::CameraPath;
use crate::scene::{BlockLayout, DEFAULT_BACKGROUND};

pub const NAMES: [&str; 5] = ["city", "terrain", "spheres", "sparse", "fog"];

/// Resolution the preset falloff is tuned for.
pub const FALLOFF_VOXELS: f64 = 32.0;

pub fn by_name(name: &str, grid: u32, lods: u32, seed: u64) -> Option<SceneSpec> {
    Some(match name {
        "city" => city(grid, lods, seed),
        "terrain" => terrain(grid, lods, seed),
        "spheres" => spheres(grid, lods, seed),
        "sparse" => sparse(grid, lods, seed),
        "fog" => fog(grid, lods, seed),
        _ => return None,
    })
}

/// Empty scene on a `grid x grid` layout of blocks with edge `block_size`,
/// with an orbit that sees the whole domain.
pub fn base_spec(name: &str, grid: u32, lods: u32, block_size: f64) -> SceneSpec {
    let extent = f64::from(grid) * block_size;
    let height = block_size;
    let center = DVec3::new(extent * 0.5, extent * 0.5, 0.0);
    SceneSpec {
        name: name.to_string(),
        seed: 0,
        layout: BlockLayout {
            origin: [0.0, 0.0],
            block_size,
            grid_dims: [grid, grid],
            z_range: [0.0, height],
            lod_count: lods,
        },
        unbounded_border: false,
        falloff: block_size / FALLOFF_VOXELS,
        primitives: Vec::new(),
        shading: ShadingSpec::default(),
        camera_path: CameraPath {
            center,
            radius: extent * 1.1,
            height: height + extent * 0.6,
            count: 24,
            target: center + DVec3::Z * height * 0.25,
            width: 96,
            image_height: 96,
            fov_y_deg: 55.0,
        },
        background: DEFAULT_BACKGROUND,
    }
}

fn rgb(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.random_range(0.15..0.9),
        rng.random_range(0.15..0.9),
        rng.random_range(0.15..0.9),
    ]
}

fn ground(thickness: f64) -> Primitive {
    Primitive {
        shape: Shape::Slab {
            z_min: 0.0,
            z_max: thickness,
        },
        density: 200.0,
        albedo: [0.45, 0.42, 0.38],
        feature: [0.1; 4],
    }
}

/// Ground slab with one opaque building per finest block.
pub fn city(grid: u32, lods: u32, seed: u64) -> SceneSpec {
    let mut s = base_spec("city", grid, lods, 1.0);
    s.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.primitives.push(ground(0.06));
    for iy in 0..grid {
        for ix in 0..grid {
            let c = DVec3::new(f64::from(ix) + 0.5, f64::from(iy) + 0.5, 0.0);
            let hx = rng.random_range(0.12..0.3);
            let hy = rng.random_range(0.12..0.3);
            let off = DVec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.0);
            let top = rng.random_range(0.25..0.8);
            s.primitives.push(Primitive {
                shape: Shape::Box {
                    min: c + off - DVec3::new(hx, hy, 0.0),
                    max: c + off + DVec3::new(hx, hy, top),
                },
                density: 200.0,
                albedo: rgb(&mut rng),
                feature: [rng.random_range(0.0..1.0), 0.5, 0.2, 0.8],
            });
        }
    }
    s
}

/// Opaque noise heightfield.
pub fn terrain(grid: u32, lods: u32, seed: u64) -> SceneSpec {
    let mut s = base_spec("terrain", grid, lods, 1.0);
    s.seed = seed;
    s.primitives.push(Primitive {
        shape: Shape::Terrain {
            base: 0.05,
            amplitude: 0.45,
            frequency: 1.7,
            octaves: 3,
        },
        density: 150.0,
        albedo: [0.35, 0.55, 0.25],
        feature: [0.3, 0.6, 0.1, 0.9],
    });
    s
}

/// Opaque and translucent spheres over a ground slab.
pub fn spheres(grid: u32, lods: u32, seed: u64) -> SceneSpec {
    let mut s = base_spec("spheres", grid, lods, 1.0);
    s.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.primitives.push(ground(0.05));
    let n = grid * grid * 2;
    let extent = f64::from(grid);
    for k in 0..n {
        let r = rng.random_range(0.12..0.3);
        let center = DVec3::new(
            rng.random_range(r..extent - r),
            rng.random_range(r..extent - r),
            rng.random_range(r..1.0 - r),
        );
        let density = if k % 3 == 0 { 4.0 } else { 200.0 };
        s.primitives.push(Primitive {
            shape: Shape::Sphere { center, radius: r },
            density,
            albedo: rgb(&mut rng),
            feature: [0.7, 0.1, rng.random_range(0.0..1.0), 0.4],
        });
    }
    s
}

/// A handful of small opaque spheres floating in empty space.
pub fn sparse(grid: u32, lods: u32, seed: u64) -> SceneSpec {
    let mut s = base_spec("sparse", grid, lods, 1.0);
    s.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = f64::from(grid);
    for _ in 0..grid * grid {
        let r = rng.random_range(0.06..0.12);
        let center = DVec3::new(
            rng.random_range(0.2..extent - 0.2),
            rng.random_range(0.2..extent - 0.2),
            rng.random_range(0.2..0.8),
        );
        s.primitives.push(Primitive {
            shape: Shape::Sphere { center, radius: r },
            density: 200.0,
            albedo: rgb(&mut rng),
            feature: [0.5; 4],
        });
    }
    s
}

/// Low-density participating medium filling the whole domain.
pub fn fog(grid: u32, lods: u32, seed: u64) -> SceneSpec {
    let mut s = base_spec("fog", grid, lods, 1.0);
    s.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = f64::from(grid);
    s.primitives.push(Primitive {
        shape: Shape::Box {
            min: DVec3::ZERO,
            max: DVec3::new(extent, extent, 1.0),
        },
        density: 0.6,
        albedo: [0.7, 0.72, 0.8],
        feature: [0.5; 4],
    });
    for _ in 0..grid * grid {
        let r = rng.random_range(0.2..0.45);
        let center = DVec3::new(
            rng.random_range(r..extent - r),
            rng.random_range(r..extent - r),
            rng.random_range(r..1.0 - r),
        );
        s.primitives.push(Primitive {
            shape: Shape::Sphere { center, radius: r },
            density: rng.random_range(0.5..2.0),
            albedo: rgb(&mut rng),
            feature: [0.5; 4],
        });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_deterministic() {
        for name in NAMES {
            for grid in [1, 2, 4] {
                let a = by_name(name, grid, 1, 3).unwrap();
                a.validate().unwrap();
                assert_eq!(a, by_name(name, grid, 1, 3).unwrap());
            }
        }
        assert!(by_name("nope", 2, 1, 0).is_none());
    }
}
