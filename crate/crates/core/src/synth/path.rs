//! Circular capture paths.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::render::Camera;
use crate::{Error, Result};

/// Orbit around `center` at horizontal `radius`, `height` above the center,
/// every pose looking at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPath {
    pub center: DVec3,
    pub radius: f64,
    pub height: f64,
    pub count: u32,
    pub target: DVec3,
    pub width: u32,
    pub image_height: u32,
    pub fov_y_deg: f64,
}

impl CameraPath {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("camera path needs at least one pose".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "orbit radius must be positive, got {}",
                self.radius
            )));
        }
        if self.width == 0 || self.image_height == 0 {
            return Err(Error::ZeroArea);
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(Error::InvalidConfig(format!("bad field of view {}", self.fov_y_deg)));
        }
        Ok(())
    }

    /// Eye position of pose `k`; pose 0 sits on the +x side of the circle.
    pub fn eye(&self, k: u32) -> DVec3 {
        let a = std::f64::consts::TAU * f64::from(k) / f64::from(self.count);
        self.center + DVec3::new(self.radius * a.cos(), self.radius * a.sin(), self.height)
    }
}

/// Poses equally spaced in angle, counterclockwise seen from above.
pub fn orbit_path(path: &CameraPath) -> Result<Vec<Camera>> {
    path.validate()?;
    Ok((0..path.count)
        .map(|k| {
            Camera::look_at(
                path.eye(k),
                path.target,
                DVec3::Z,
                path.width,
                path.image_height,
                path.fov_y_deg,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(count: u32) -> CameraPath {
        CameraPath {
            center: DVec3::new(1.0, 2.0, 0.0),
            radius: 5.0,
            height: 3.0,
            count,
            target: DVec3::new(1.0, 2.0, 0.5),
            width: 32,
            image_height: 24,
            fov_y_deg: 60.0,
        }
    }

    #[test]
    fn single_pose_on_positive_x() {
        let cams = orbit_path(&path(1)).unwrap();
        assert_eq!(cams.len(), 1);
        let p = cams[0].position;
        assert!((p - DVec3::new(6.0, 2.0, 3.0)).length() < 1e-12);
    }

    #[test]
    fn quarter_turns() {
        let cams = orbit_path(&path(4)).unwrap();
        let expect = [(5.0, 0.0), (0.0, 5.0), (-5.0, 0.0), (0.0, -5.0)];
        for (c, (dx, dy)) in cams.iter().zip(expect) {
            assert!((c.position.x - 1.0 - dx).abs() < 1e-12);
            assert!((c.position.y - 2.0 - dy).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_right_handed_and_aimed() {
        for c in orbit_path(&path(37)).unwrap() {
            let m = c.matrix();
            let e = m.transpose() * m - glam::DMat3::IDENTITY;
            assert!(e.to_cols_array().iter().all(|v| v.abs() < 1e-9));
            assert!((m.determinant() - 1.0).abs() < 1e-9);
            let to_target = (path(1).target - c.position).normalize();
            assert!((c.forward() - to_target).length() < 1e-9);
        }
    }

    #[test]
    fn rejects_degenerate_paths() {
        let mut p = path(0);
        assert!(orbit_path(&p).is_err());
        p.count = 3;
        p.radius = 0.0;
        assert!(orbit_path(&p).is_err());
    }
}
