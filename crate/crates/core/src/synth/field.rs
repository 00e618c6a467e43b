//! Scene descriptions and the procedural field built from them.

use std::path::Path;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::noise::fractal_noise;
use super::path::CameraPath;
use crate::bake::FieldSource;
use crate::geometry::Aabb;
use crate::scene::assets::logit;
use crate::scene::{BlockId, BlockLayout, DeferredShaderWeights, CHANNELS, DEFAULT_BACKGROUND};
use crate::{Error, Result};

/// Floor of the density pre-activation: empty space.
pub const DENSITY_FLOOR: f64 = -9.0;
/// Largest density pre-activation emitted by the field.
pub const DENSITY_CEIL: f64 = 9.2;
/// Color and feature logits are clamped to this magnitude.
pub const LOGIT_LIMIT: f64 = 6.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Horizontal layer between two heights.
    Slab { z_min: f64, z_max: f64 },
    Sphere { center: DVec3, radius: f64 },
    Box { min: DVec3, max: DVec3 },
    /// Everything below a noise heightfield.
    Terrain {
        base: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default = "default_octaves")]
        octaves: u32,
    },
}

fn default_octaves() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    /// Density inside the primitive (1/m).
    pub density: f64,
    pub albedo: [f64; 3],
    #[serde(default)]
    pub feature: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadingSpec {
    /// Magnitude of the random shading weights; zero gives a Lambertian scene.
    #[serde(default)]
    pub scale: f64,
    #[serde(default = "default_frequencies")]
    pub frequencies: u32,
}

fn default_frequencies() -> u32 {
    crate::scene::shader::DEFAULT_FREQUENCIES
}

impl Default for ShadingSpec {
    fn default() -> Self {
        ShadingSpec {
            scale: 0.0,
            frequencies: default_frequencies(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub layout: BlockLayout,
    /// Contract the grids of blocks on the layout border.
    #[serde(default)]
    pub unbounded_border: bool,
    /// Surface transition width in meters.
    pub falloff: f64,
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub shading: ShadingSpec,
    pub camera_path: CameraPath,
    #[serde(default = "default_background")]
    pub background: [f64; 3],
}

fn default_background() -> [f64; 3] {
    DEFAULT_BACKGROUND
}

impl SceneSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SceneSpec =
            serde_json::from_str(&text).map_err(|e| Error::asset(path, e.to_string()))?;
        spec.validate().map_err(|e| Error::asset(path, e.to_string()))?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene spec serializes");
        s.push('\n');
        s
    }

    pub fn bounds(&self) -> Aabb {
        let d = self.layout.domain();
        Aabb::new(d.min.extend(self.layout.z_range[0]), d.max.extend(self.layout.z_range[1]))
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.camera_path.validate()?;
        if !(self.falloff > 0.0 && self.falloff.is_finite()) {
            return Err(Error::InvalidConfig(format!("falloff must be positive, got {}", self.falloff)));
        }
        let bounds = self.bounds();
        for (i, p) in self.primitives.iter().enumerate() {
            let bad = |m: &str| Err(Error::InvalidConfig(format!("primitive {i}: {m}")));
            let finite = p.density.is_finite()
                && p.albedo.iter().chain(&p.feature).all(|v| v.is_finite());
            if !finite || p.density < 0.0 {
                return bad("amplitudes must be finite and density non-negative");
            }
            if p.albedo.iter().chain(&p.feature).any(|v| !(0.0..=1.0).contains(v)) {
                return bad("albedo and feature must lie in [0, 1]");
            }
            let inside = |q: DVec3| q.cmpge(bounds.min).all() && q.cmple(bounds.max).all();
            let ok = match &p.shape {
                Shape::Slab { z_min, z_max } => {
                    z_min < z_max && *z_min >= bounds.min.z && *z_max <= bounds.max.z
                }
                Shape::Sphere { center, radius } => {
                    *radius > 0.0 && inside(*center - *radius) && inside(*center + *radius)
                }
                Shape::Box { min, max } => min.cmplt(*max).all() && inside(*min) && inside(*max),
                Shape::Terrain {
                    base, amplitude, frequency, ..
                } => {
                    *amplitude >= 0.0
                        && *frequency > 0.0
                        && *base >= bounds.min.z
                        && base + amplitude <= bounds.max.z
                }
            };
            if !ok {
                return bad("shape is degenerate or leaves the scene box");
            }
        }
        Ok(())
    }

    /// Shading weights of one LOD.
    pub fn shader(&self, lod: u32) -> DeferredShaderWeights {
        DeferredShaderWeights::random(
            self.seed ^ 0x5AD3_0000_0000_0000 ^ u64::from(lod),
            self.shading.scale,
            self.shading.frequencies,
        )
    }
}

/// Procedural ground-truth field of a scene.
#[derive(Clone, Debug)]
pub struct SyntheticField {
    spec: SceneSpec,
    bounds: Aabb,
}

pub fn build_field(spec: &SceneSpec) -> Result<SyntheticField> {
    spec.validate()?;
    Ok(SyntheticField {
        bounds: spec.bounds(),
        spec: spec.clone(),
    })
}

#[inline]
fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl SyntheticField {
    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    fn signed_distance(&self, shape: &Shape, p: DVec3) -> f64 {
        match shape {
            Shape::Slab { z_min, z_max } => (z_min - p.z).max(p.z - z_max),
            Shape::Sphere { center, radius } => p.distance(*center) - radius,
            Shape::Box { min, max } => {
                let c = (*min + *max) * 0.5;
                let h = (*max - *min) * 0.5;
                let q = (p - c).abs() - h;
                q.max(DVec3::ZERO).length() + q.max_element().min(0.0)
            }
            Shape::Terrain {
                base,
                amplitude,
                frequency,
                octaves,
            } => {
                let n = fractal_noise(self.spec.seed, p.x * frequency, p.y * frequency, *octaves);
                p.z - (base + amplitude * n)
            }
        }
    }

    /// Density in 1/m.
    pub fn density(&self, p: DVec3) -> f64 {
        self.spec
            .primitives
            .iter()
            .map(|prim| prim.density * self.coverage(prim, p))
            .sum()
    }

    #[inline]
    fn coverage(&self, prim: &Primitive, p: DVec3) -> f64 {
        smoothstep(0.5 - self.signed_distance(&prim.shape, p) / self.spec.falloff)
    }
}

impl FieldSource for SyntheticField {
    fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
        let mut sigma = 0.0;
        let mut wsum = 0.0;
        let mut albedo = DVec3::ZERO;
        let mut feature = [0.0; 4];
        for prim in &self.spec.primitives {
            let sd = self.signed_distance(&prim.shape, p);
            let cov = smoothstep(0.5 - sd / self.spec.falloff);
            let d = prim.density * cov;
            sigma += d;
            // A faint tail keeps colors defined just outside surfaces.
            let w = d + 1e-9 * (-(sd.max(0.0)) / self.spec.falloff).exp();
            wsum += w;
            albedo += w * DVec3::from_array(prim.albedo);
            for (f, a) in feature.iter_mut().zip(prim.feature) {
                *f += w * a;
            }
        }
        let (albedo, feature) = if wsum > 0.0 {
            (albedo / wsum, feature.map(|f| f / wsum))
        } else {
            (DVec3::splat(0.5), [0.0; 4])
        };
        let lg = |v: f64| logit(v).clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
        let density = if sigma > 0.0 {
            sigma.ln().clamp(DENSITY_FLOOR, DENSITY_CEIL)
        } else {
            DENSITY_FLOOR
        };
        [
            density,
            lg(albedo.x),
            lg(albedo.y),
            lg(albedo.z),
            lg(feature[0]),
            lg(feature[1]),
            lg(feature[2]),
            lg(feature[3]),
        ]
    }

    fn bounds(&self) -> Aabb {
        self.bounds
    }

    fn is_unbounded(&self, id: &BlockId) -> bool {
        self.spec.unbounded_border && self.spec.layout.is_border(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::activate;
    use crate::synth::presets;
    use rand::{Rng, SeedableRng};

    fn sphere_scene() -> SceneSpec {
        let mut s = presets::base_spec("sphere", 1, 1, 2.0);
        s.primitives = vec![Primitive {
            shape: Shape::Sphere {
                center: DVec3::new(1.0, 1.0, 1.0),
                radius: 0.5,
            },
            density: 100.0,
            albedo: [0.9, 0.3, 0.2],
            feature: [0.0; 4],
        }];
        s
    }

    #[test]
    fn empty_scene_is_zero() {
        let mut s = sphere_scene();
        s.primitives.clear();
        let f = build_field(&s).unwrap();
        for p in [DVec3::ZERO, DVec3::new(1.0, 1.0, 1.0), DVec3::new(0.3, 1.7, 0.2)] {
            assert_eq!(f.density(p), 0.0);
            assert!(activate(&f.pre_activations(p)).sigma < 2e-4);
        }
    }

    #[test]
    fn sphere_support_and_constant_albedo() {
        let s = sphere_scene();
        let f = build_field(&s).unwrap();
        let c = DVec3::new(1.0, 1.0, 1.0);
        let half = s.falloff * 0.5;
        assert!(f.density(c) > 0.0);
        assert!(f.density(c + DVec3::X * (0.5 + half * 0.9)) > 0.0);
        assert_eq!(f.density(c + DVec3::X * (0.5 + half * 1.01)), 0.0);
        for p in [c, c + DVec3::Y * 0.3, c + DVec3::Z * 0.45] {
            let a = activate(&f.pre_activations(p));
            assert!((a.diffuse - DVec3::new(0.9, 0.3, 0.2)).abs().max_element() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_field() {
        let s = presets::terrain(2, 2, 1);
        let a = build_field(&s).unwrap();
        let b = build_field(&s).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let bx = s.bounds();
        for _ in 0..10_000 {
            let p = DVec3::new(
                rng.random_range(bx.min.x..bx.max.x),
                rng.random_range(bx.min.y..bx.max.y),
                rng.random_range(bx.min.z..bx.max.z),
            );
            let (u, v) = (a.pre_activations(p), b.pre_activations(p));
            assert_eq!(u, v);
            assert!(u.iter().all(|x| x.is_finite()));
            assert!(a.density(p) >= 0.0);
        }
    }

    #[test]
    fn rejects_primitive_outside_box() {
        let mut s = sphere_scene();
        if let Shape::Sphere { radius, .. } = &mut s.primitives[0].shape {
            *radius = 5.0;
        }
        assert!(build_field(&s).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = presets::city(2, 2, 1);
        let t: SceneSpec = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(s, t);
    }
}
