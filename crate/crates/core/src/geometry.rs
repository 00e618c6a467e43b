//! Rays and axis-aligned boxes in world space (meters, z up).

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

/// Direction tolerance accepted by [`Ray::new`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub dir: DVec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    /// Returns `None` unless `dir` is unit length and `t_near < t_far`.
    pub fn new(origin: DVec3, dir: DVec3, t_near: f64, t_far: f64) -> Option<Self> {
        if (dir.length() - 1.0).abs() > UNIT_TOLERANCE || !(t_near < t_far) || !origin.is_finite()
        {
            return None;
        }
        Some(Ray {
            origin,
            dir,
            t_near,
            t_far,
        })
    }

    /// Normalizes `dir`; panics on a zero direction.
    pub fn towards(origin: DVec3, dir: DVec3) -> Self {
        let dir = dir.normalize();
        assert!(dir.is_finite(), "ray direction must be non-zero");
        Ray {
            origin,
            dir,
            t_near: 0.0,
            t_far: 1e9,
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + self.dir * t
    }

    /// True when the direction has (almost) no xy component.
    pub fn is_vertical(&self) -> bool {
        self.dir.truncate().length() < 1e-6
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub fn new(min: DVec3, max: DVec3) -> Self {
        Aabb { min, max }
    }

    pub fn size(&self) -> DVec3 {
        self.max - self.min
    }

    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    /// Slab test clipped to the ray's `[t_near, t_far]`. Returns the entry and exit parameters.
    pub fn intersect(&self, ray: &Ray) -> Option<(f64, f64)> {
        let mut t0 = ray.t_near;
        let mut t1 = ray.t_far;
        for axis in 0..3 {
            let o = ray.origin[axis];
            let d = ray.dir[axis];
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((lo - o) * inv, (hi - o) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        (t0 < t1).then_some((t0, t1))
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: DVec2,
    pub max: DVec2,
}

impl Rect {
    pub fn center(&self) -> DVec2 {
        (self.min + self.max) * 0.5
    }

    pub fn corners(&self) -> [DVec2; 4] {
        [
            self.min,
            DVec2::new(self.max.x, self.min.y),
            self.max,
            DVec2::new(self.min.x, self.max.y),
        ]
    }

    pub fn contains(&self, p: DVec2) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }
}
