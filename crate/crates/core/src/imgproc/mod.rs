//! Scalar image buffers, Gaussian-free box pyramids, bilinear sampling,
//! gradients, and the SSIM / appearance-residual alignment metrics.

mod image;
mod pyramid;
mod ssim;

pub use image::{to_grayscale, ColorImage, DepthImage, Image, SampleError};
pub use pyramid::{ImagePyramid, PyramidLevel};
pub use ssim::{appearance_residual, ssim, Ssim, SSIM_C1, SSIM_C2, SSIM_DEFAULT_WINDOW};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ImgError {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid image data: {0}")]
    InvalidData(String),
    #[error("SSIM window must be an odd integer >= 3, got {0}")]
    InvalidWindow(usize),
    #[error("residual weight must be in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("pyramid needs at least one level")]
    EmptyPyramid,
    #[error("camera size {cam_w}x{cam_h} does not match image {img_w}x{img_h}")]
    CameraMismatch {
        cam_w: usize,
        cam_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}
