use glam::{DMat3, DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::geometry::Ray;
use crate::{Error, Result};

/// Pinhole camera. Camera axes are x right, y down, z forward; `rotation`
/// maps camera coordinates to world coordinates (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: DVec3,
    pub rotation: [[f64; 3]; 3],
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Accepted camera file forms.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraFile {
    LookAt {
        eye: DVec3,
        target: DVec3,
        #[serde(default = "default_up")]
        up: DVec3,
        width: u32,
        height: u32,
        fov_y_deg: f64,
    },
    Explicit(Camera),
}

fn default_up() -> DVec3 {
    DVec3::Z
}

impl CameraFile {
    pub fn into_camera(self) -> Camera {
        match self {
            CameraFile::LookAt {
                eye,
                target,
                up,
                width,
                height,
                fov_y_deg,
            } => Camera::look_at(eye, target, up, width, height, fov_y_deg),
            CameraFile::Explicit(c) => c,
        }
    }
}

impl Camera {
    /// Camera at `eye` facing `target`; `up` only needs to be non-parallel to the view axis.
    pub fn look_at(
        eye: DVec3,
        target: DVec3,
        up: DVec3,
        width: u32,
        height: u32,
        fov_y_deg: f64,
    ) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(up);
        if right.length() < 1e-9 {
            right = forward.cross(DVec3::Y);
            if right.length() < 1e-9 {
                right = forward.cross(DVec3::X);
            }
        }
        let right = right.normalize();
        let down = forward.cross(right);
        let m = DMat3::from_cols(right, down, forward);
        let f = 0.5 * f64::from(height) / (0.5 * fov_y_deg.to_radians()).tan();
        Camera {
            position: eye,
            rotation: mat_to_rows(m),
            width,
            height,
            fx: f,
            fy: f,
            cx: 0.5 * f64::from(width),
            cy: 0.5 * f64::from(height),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CameraFile =
            serde_json::from_str(&text).map_err(|e| Error::asset(path, e.to_string()))?;
        let cam = file.into_camera();
        cam.validate().map_err(|e| Error::asset(path, e.to_string()))?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::ZeroArea);
        }
        let m = self.matrix();
        let ortho = (m.transpose() * m - DMat3::IDENTITY).to_cols_array();
        if ortho.iter().any(|v| v.abs() > 1e-6) || !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig("camera rotation or intrinsics invalid".into()));
        }
        Ok(())
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Self {
        let sx = f64::from(width) / f64::from(self.width);
        let sy = f64::from(height) / f64::from(self.height);
        Camera {
            width,
            height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            ..self.clone()
        }
    }

    pub fn matrix(&self) -> DMat3 {
        rows_to_mat(self.rotation)
    }

    pub fn forward(&self) -> DVec3 {
        self.matrix().z_axis
    }

    /// Ray through the center of pixel `(x, y)`.
    pub fn ray(&self, x: u32, y: u32) -> Ray {
        self.ray_at(f64::from(x) + 0.5, f64::from(y) + 0.5)
    }

    /// Ray through continuous image coordinates.
    pub fn ray_at(&self, u: f64, v: f64) -> Ray {
        let d = DVec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        Ray::towards(self.position, self.matrix() * d)
    }

    /// Camera-space coordinates of a world point.
    pub fn to_camera(&self, p: DVec3) -> DVec3 {
        self.matrix().transpose() * (p - self.position)
    }

    /// Image coordinates of a world point in front of the camera.
    pub fn project(&self, p: DVec3) -> Option<DVec2> {
        let q = self.to_camera(p);
        (q.z > 0.0).then(|| {
            DVec2::new(self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy)
        })
    }

    /// True if a world point projects inside the image rectangle.
    pub fn sees(&self, p: DVec3) -> bool {
        self.project(p).is_some_and(|uv| {
            uv.x >= 0.0
                && uv.y >= 0.0
                && uv.x <= f64::from(self.width)
                && uv.y <= f64::from(self.height)
        })
    }
}

pub(crate) fn mat_to_rows(m: DMat3) -> [[f64; 3]; 3] {
    let r = m.transpose();
    [r.x_axis.to_array(), r.y_axis.to_array(), r.z_axis.to_array()]
}

pub(crate) fn rows_to_mat(rows: [[f64; 3]; 3]) -> DMat3 {
    DMat3::from_cols(
        DVec3::from(rows[0]),
        DVec3::from(rows[1]),
        DVec3::from(rows[2]),
    )
    .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_is_right_handed_and_centered() {
        let cam = Camera::look_at(
            DVec3::new(3.0, -2.0, 4.0),
            DVec3::new(0.0, 0.0, 0.5),
            DVec3::Z,
            64,
            48,
            60.0,
        );
        cam.validate().unwrap();
        let m = cam.matrix();
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        let center = cam.project(DVec3::new(0.0, 0.0, 0.5)).unwrap();
        assert!((center - DVec2::new(32.0, 24.0)).length() < 1e-9);
        // World up projects towards the top of the image.
        let above = cam.project(DVec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(above.y < center.y);
        assert!(cam.project(DVec3::new(6.0, -4.0, 7.5)).is_none());
    }

    #[test]
    fn rays_reproject_to_their_pixel() {
        let cam = Camera::look_at(DVec3::new(0.0, -5.0, 1.0), DVec3::ZERO, DVec3::Z, 32, 32, 45.0);
        let r = cam.ray(7, 21);
        let uv = cam.project(r.at(3.0)).unwrap();
        assert!((uv - DVec2::new(7.5, 21.5)).length() < 1e-9);
    }

    #[test]
    fn camera_file_forms() {
        let f: CameraFile = serde_json::from_str(
            r#"{"eye":[0,-4,2],"target":[0,0,0],"width":8,"height":8,"fov_y_deg":50}"#,
        )
        .unwrap();
        let cam = f.into_camera();
        let json = serde_json::to_string(&cam).unwrap();
        let back: CameraFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_camera(), cam);
    }
}
