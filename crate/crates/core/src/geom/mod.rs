//! Pinhole camera model and SE(3)/SO(3) machinery shared by the whole
//! pipeline.

mod camera;
mod se3;

pub use camera::{PinholeCamera, Projection};
pub use se3::{Pose, Twist};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("pixel ({0}, {1}) outside the image domain")]
    PixelOutsideImage(f64, f64),
    #[error("matrix is not a rotation: {0}")]
    InvalidRotation(String),
}
