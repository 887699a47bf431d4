//! Pinhole intrinsics.

use core::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraError(pub &'static str);

impl fmt::Display for CameraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid camera: {}", self.0)
    }
}

impl core::error::Error for CameraError {}

impl Default for CameraModel {
    /// 320×240 with a wide (~77° horizontal) field of view, principal point at the image center.
    fn default() -> Self {
        Self {
            fx: 200.0,
            fy: 200.0,
            cx: 159.5,
            cy: 119.5,
            width: 320,
            height: 240,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(CameraError("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError("image size must be non-zero"));
        }
        let inside = |c: f64, n: usize| c >= 0.0 && c <= (n - 1) as f64;
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return Err(CameraError("principal point must lie inside the image"));
        }
        Ok(())
    }

    /// Intrinsics of pyramid level `level` (0 = full resolution), where
    /// level pixel `i` sits at full-resolution pixel `2^level · i`.
    pub fn at_level(&self, level: usize) -> CameraModel {
        let mut cam = *self;
        for _ in 0..level {
            cam = CameraModel {
                fx: cam.fx * 0.5,
                fy: cam.fy * 0.5,
                cx: cam.cx * 0.5,
                cy: cam.cy * 0.5,
                width: cam.width.div_ceil(2),
                height: cam.height.div_ceil(2),
            };
        }
        cam
    }

    /// Point in camera coordinates to pixel; `None` when `z ≤ 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if !(p.z > 0.0) {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Ray through pixel `(u, v)` scaled to unit depth (`z = 1`).
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pixel with depth along the optical axis to a 3D point.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        self.ray(u, v) * z
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_unproject() {
        let cam = CameraModel::default();
        let p = cam.unproject(10.0, 200.0, 2.5);
        let (u, v) = cam.project(&p).unwrap();
        assert!((u - 10.0).abs() < 1e-12 && (v - 200.0).abs() < 1e-12);
        assert!(cam.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn level_intrinsics() {
        let cam = CameraModel::default().at_level(3);
        assert_eq!((cam.width, cam.height), (40, 30));
        assert_eq!(cam.fx, 25.0);
        assert_eq!(cam.cx, 159.5 / 8.0);
    }

    #[test]
    fn validation() {
        assert!(CameraModel::default().validate().is_ok());
        let off_center = CameraModel { cx: 400.0, ..CameraModel::default() };
        assert!(off_center.validate().is_err());
        let flat = CameraModel { fy: 0.0, ..CameraModel::default() };
        assert!(flat.validate().is_err());
    }
}
