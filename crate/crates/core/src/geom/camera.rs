use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeomError;

/// Pinhole camera intrinsics together with the image size they refer to.
///
/// Pixel convention: coordinates are `(u, v)` with `u` the column index and
/// the origin at the center of the top-left pixel. The valid image domain is
/// `[0, width-1] x [0, height-1]` in continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Outcome of projecting a 3D point. A point behind the camera is reported
/// separately from one that projects outside the image bounds: tracking
/// counts the latter toward the overlap ratio and must never sample the
/// former.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Pixel inside `[0, width-1] x [0, height-1]`.
    InView(Vector2<f64>),
    /// Pixel coordinates fall outside the image bounds.
    OutOfView(Vector2<f64>),
    /// Point has non-positive depth; no meaningful pixel exists.
    BehindCamera,
}

impl Projection {
    pub fn in_view(&self) -> Option<Vector2<f64>> {
        match self {
            Projection::InView(p) => Some(*p),
            _ => None,
        }
    }

    /// Pixel coordinates regardless of view classification; None only for
    /// points behind the camera.
    pub fn pixel(&self) -> Option<Vector2<f64>> {
        match self {
            Projection::InView(p) | Projection::OutOfView(p) => Some(*p),
            Projection::BehindCamera => None,
        }
    }
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeomError> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(GeomError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeomError::InvalidIntrinsics(format!(
                "image size must be non-zero, got {width}x{height}"
            )));
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(GeomError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Camera for pyramid level `level`: focal lengths and principal point
    /// are halved per level, image sizes floor-divided by two.
    pub fn scaled(&self, level: u32) -> Result<Self, GeomError> {
        let s = f64::from(1u32 << level);
        Self::new(
            self.fx / s,
            self.fy / s,
            self.cx / s,
            self.cy / s,
            self.width >> level,
            self.height >> level,
        )
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }

    /// Project a camera-frame point to pixel coordinates.
    pub fn project(&self, point: &Vector3<f64>) -> Projection {
        if point.z <= 0.0 {
            return Projection::BehindCamera;
        }
        let inv_z = 1.0 / point.z;
        let u = self.fx * point.x * inv_z + self.cx;
        let v = self.fy * point.y * inv_z + self.cy;
        let pixel = Vector2::new(u, v);
        if self.contains(u, v) {
            Projection::InView(pixel)
        } else {
            Projection::OutOfView(pixel)
        }
    }

    /// Back-project a pixel at the given depth to a camera-frame point with
    /// `z = depth`.
    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>, GeomError> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(GeomError::InvalidDepth(depth));
        }
        if !self.contains(u, v) {
            return Err(GeomError::PixelOutsideImage(u, v));
        }
        Ok(Vector3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        ))
    }
}
