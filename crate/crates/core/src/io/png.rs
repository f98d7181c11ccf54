use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::imgproc::{ColorImage, DepthImage};

use super::IoError;

/// Load an 8-bit RGB PNG into channels scaled to [0, 1].
pub fn load_rgb_png(path: &Path) -> Result<ColorImage, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::Image {
            path: path.display().to_string(),
            source: e,
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| {
            [
                f64::from(p[0]) / 255.0,
                f64::from(p[1]) / 255.0,
                f64::from(p[2]) / 255.0,
            ]
        })
        .collect();
    ColorImage::from_data(w, h, data).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn save_rgb_png(path: &Path, img: &ColorImage) -> Result<(), IoError> {
    let mut out = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(img.width() as u32, img.height() as u32);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let [r, g, b] = img.get(x as usize, y as usize);
        *px = Rgb([
            (r * 255.0).round().clamp(0.0, 255.0) as u8,
            (g * 255.0).round().clamp(0.0, 255.0) as u8,
            (b * 255.0).round().clamp(0.0, 255.0) as u8,
        ]);
    }
    out.save(path).map_err(|e| IoError::Image {
        path: path.display().to_string(),
        source: e,
    })
}

/// Load a 16-bit single-channel PNG as depth in meters; stored value 0 is
/// the invalid sentinel.
pub fn load_depth_png(path: &Path, depth_scale: f64) -> Result<DepthImage, IoError> {
    let img = image::open(path).map_err(|e| IoError::Image {
        path: path.display().to_string(),
        source: e,
    })?;
    let img = match img {
        DynamicImage::ImageLuma16(buf) => buf,
        other => other.to_luma16(),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| f64::from(p[0]) * depth_scale)
        .collect();
    DepthImage::from_data(w, h, data).map_err(|e| IoError::format(path, e.to_string()))
}

/// Save depth in meters as 16-bit PNG, quantized by `depth_scale`. Values
/// that would exceed the u16 range are clamped; invalid pixels store 0.
pub fn save_depth_png(path: &Path, depth: &DepthImage, depth_scale: f64) -> Result<(), IoError> {
    let mut out =
        ImageBuffer::<Luma<u16>, Vec<u16>>::new(depth.width() as u32, depth.height() as u32);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let d = depth.get(x as usize, y as usize);
        let stored = if d > 0.0 {
            (d / depth_scale).round().clamp(1.0, 65535.0) as u16
        } else {
            0
        };
        *px = Luma([stored]);
    }
    DynamicImage::ImageLuma16(out)
        .save(path)
        .map_err(|e| IoError::Image {
            path: path.display().to_string(),
            source: e,
        })
}
