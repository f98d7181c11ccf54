use crate::geom::PinholeCamera;

use super::{DepthImage, Image, ImgError};

/// One pyramid level: intensity, optional depth, and the camera scaled to
/// this resolution.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub intensity: Image,
    pub depth: Option<DepthImage>,
    pub camera: PinholeCamera,
}

/// Coarse-to-fine image pyramid. Level 0 is full resolution; every level
/// halves the previous one (integer floor), with intrinsics scaled to match.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<PyramidLevel>,
}

impl ImagePyramid {
    pub fn build(
        intensity: Image,
        depth: Option<DepthImage>,
        camera: PinholeCamera,
        num_levels: usize,
    ) -> Result<Self, ImgError> {
        if num_levels == 0 {
            return Err(ImgError::EmptyPyramid);
        }
        if camera.width != intensity.width() || camera.height != intensity.height() {
            return Err(ImgError::CameraMismatch {
                cam_w: camera.width,
                cam_h: camera.height,
                img_w: intensity.width(),
                img_h: intensity.height(),
            });
        }
        if let Some(d) = &depth {
            if d.width() != intensity.width() || d.height() != intensity.height() {
                return Err(ImgError::DimensionMismatch {
                    expected_w: intensity.width(),
                    expected_h: intensity.height(),
                    got_w: d.width(),
                    got_h: d.height(),
                });
            }
        }

        let mut levels = Vec::with_capacity(num_levels);
        levels.push(PyramidLevel {
            intensity,
            depth,
            camera,
        });
        for l in 1..num_levels {
            let prev = &levels[l - 1];
            let intensity = prev.intensity.downsample()?;
            let depth = prev.depth.as_ref().map(|d| d.downsample()).transpose()?;
            let camera = camera.scaled(l as u32)?;
            debug_assert_eq!(camera.width, intensity.width());
            debug_assert_eq!(camera.height, intensity.height());
            levels.push(PyramidLevel {
                intensity,
                depth,
                camera,
            });
        }
        Ok(Self { levels })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &PyramidLevel {
        &self.levels[l]
    }

    pub fn coarsest(&self) -> &PyramidLevel {
        self.levels.last().expect("pyramid has at least one level")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn camera(w: usize, h: usize) -> PinholeCamera {
        PinholeCamera::new(
            w as f64,
            w as f64,
            w as f64 / 2.0 - 0.5,
            h as f64 / 2.0 - 0.5,
            w,
            h,
        )
        .unwrap()
    }

    #[test]
    fn dimensions_floor_per_level() {
        let img = Image::new(20, 14);
        let pyr = ImagePyramid::build(img, None, camera(20, 14), 3).unwrap();
        assert_eq!(pyr.num_levels(), 3);
        assert_eq!(pyr.level(1).intensity.width(), 10);
        assert_eq!(pyr.level(2).intensity.width(), 5);
        assert_eq!(pyr.level(2).intensity.height(), 3);
        assert_eq!(pyr.level(2).camera.width, 5);
    }

    #[test]
    fn box_filter_preserves_mean_for_aligned_sizes() {
        let w = 32;
        let h = 16;
        let data: Vec<f64> = (0..w * h)
            .map(|i| ((i * 7919) % 1000) as f64 / 1000.0)
            .collect();
        let img = Image::from_data(w, h, data).unwrap();
        let mean0 = img.mean();
        let pyr = ImagePyramid::build(img, None, camera(w, h), 4).unwrap();
        for l in 0..4 {
            assert_relative_eq!(pyr.level(l).intensity.mean(), mean0, epsilon = 1e-6);
        }
    }

    #[test]
    fn depth_propagates_with_valid_only_mean() {
        let mut d = DepthImage::invalid(4, 4);
        d.set(0, 0, 2.0);
        d.set(1, 1, 4.0);
        let pyr = ImagePyramid::build(Image::new(4, 4), Some(d), camera(4, 4), 2).unwrap();
        let d1 = pyr.level(1).depth.as_ref().unwrap();
        assert_relative_eq!(d1.get(0, 0), 3.0, epsilon = 1e-15);
        assert!(!d1.is_valid(1, 1));
    }

    #[test]
    fn camera_mismatch_rejected() {
        let img = Image::new(8, 8);
        assert!(matches!(
            ImagePyramid::build(img, None, camera(16, 16), 2),
            Err(ImgError::CameraMismatch { .. })
        ));
    }
}
