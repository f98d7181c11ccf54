use thiserror::Error;

use super::ImgError;

/// Sampling failure modes. Out-of-domain is ordinary control flow during
/// warping; non-finite coordinates indicate a caller bug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("sample coordinates outside the image support")]
    OutOfDomain,
    #[error("sample coordinates are not finite")]
    NonFinite,
}

/// Row-major scalar raster. Intensity images hold values in [0, 1]; derived
/// maps (gradients, residuals) may hold any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImgError> {
        if data.len() != width * height {
            return Err(ImgError::InvalidData(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(ImgError::InvalidData(format!("non-finite value {bad}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Like `from_data` but additionally requires values in [0, 1].
    pub fn intensity_from_data(
        width: usize,
        height: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImgError> {
        if let Some(bad) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(ImgError::InvalidData(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Self::from_data(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u] = value;
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    #[inline]
    fn bilinear_cell(&self, u: f64, v: f64) -> Result<(usize, usize, f64, f64), SampleError> {
        if !u.is_finite() || !v.is_finite() {
            return Err(SampleError::NonFinite);
        }
        if self.width < 2 || self.height < 2 {
            return Err(SampleError::OutOfDomain);
        }
        let max_u = (self.width - 1) as f64;
        let max_v = (self.height - 1) as f64;
        if u < 0.0 || v < 0.0 || u > max_u || v > max_v {
            return Err(SampleError::OutOfDomain);
        }
        let u0 = (u.floor() as usize).min(self.width - 2);
        let v0 = (v.floor() as usize).min(self.height - 2);
        Ok((u0, v0, u - u0 as f64, v - v0 as f64))
    }

    /// Bilinear interpolation of the four neighbors; exact on grid points.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Result<f64, SampleError> {
        let (u0, v0, a, b) = self.bilinear_cell(u, v)?;
        let p00 = self.get(u0, v0);
        let p10 = self.get(u0 + 1, v0);
        let p01 = self.get(u0, v0 + 1);
        let p11 = self.get(u0 + 1, v0 + 1);
        Ok((1.0 - b) * ((1.0 - a) * p00 + a * p10) + b * ((1.0 - a) * p01 + a * p11))
    }

    /// Bilinear sample together with the exact partial derivatives of the
    /// interpolant at (u, v). Using the interpolant's own derivative keeps
    /// analytic Jacobians consistent with finite differences of the sampled
    /// values.
    pub fn sample_bilinear_with_grad(
        &self,
        u: f64,
        v: f64,
    ) -> Result<(f64, f64, f64), SampleError> {
        let (u0, v0, a, b) = self.bilinear_cell(u, v)?;
        let p00 = self.get(u0, v0);
        let p10 = self.get(u0 + 1, v0);
        let p01 = self.get(u0, v0 + 1);
        let p11 = self.get(u0 + 1, v0 + 1);
        let value = (1.0 - b) * ((1.0 - a) * p00 + a * p10) + b * ((1.0 - a) * p01 + a * p11);
        let du = (1.0 - b) * (p10 - p00) + b * (p11 - p01);
        let dv = (1.0 - a) * (p01 - p00) + a * (p11 - p10);
        Ok((value, du, dv))
    }

    /// Half-size image where every output pixel is the mean of its 2x2
    /// source block. Odd trailing rows/columns are dropped.
    pub fn downsample(&self) -> Result<Image, ImgError> {
        if self.width < 2 || self.height < 2 {
            return Err(ImgError::TooSmall {
                width: self.width,
                height: self.height,
                min: 2,
            });
        }
        let w = self.width / 2;
        let h = self.height / 2;
        let mut out = Image::new(w, h);
        for v in 0..h {
            for u in 0..w {
                let s = self.get(2 * u, 2 * v)
                    + self.get(2 * u + 1, 2 * v)
                    + self.get(2 * u, 2 * v + 1)
                    + self.get(2 * u + 1, 2 * v + 1);
                out.set(u, v, s * 0.25);
            }
        }
        Ok(out)
    }

    /// Central-difference gradients; one-sided at the borders.
    pub fn gradient(&self) -> Result<(Image, Image), ImgError> {
        if self.width < 3 || self.height < 3 {
            return Err(ImgError::TooSmall {
                width: self.width,
                height: self.height,
                min: 3,
            });
        }
        let mut gx = Image::new(self.width, self.height);
        let mut gy = Image::new(self.width, self.height);
        for v in 0..self.height {
            for u in 0..self.width {
                let dx = if u == 0 {
                    self.get(1, v) - self.get(0, v)
                } else if u == self.width - 1 {
                    self.get(u, v) - self.get(u - 1, v)
                } else {
                    0.5 * (self.get(u + 1, v) - self.get(u - 1, v))
                };
                let dy = if v == 0 {
                    self.get(u, 1) - self.get(u, 0)
                } else if v == self.height - 1 {
                    self.get(u, v) - self.get(u, v - 1)
                } else {
                    0.5 * (self.get(u, v + 1) - self.get(u, v - 1))
                };
                gx.set(u, v, dx);
                gy.set(u, v, dy);
            }
        }
        Ok((gx, gy))
    }
}

/// Depth raster in meters. Non-positive values mark invalid pixels and are
/// canonicalized to exactly 0.0 at construction; valid pixels are strictly
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub const INVALID: f64 = 0.0;

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Self::INVALID; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImgError> {
        if data.len() != width * height {
            return Err(ImgError::InvalidData(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| x.is_nan() || x.is_infinite()) {
            return Err(ImgError::InvalidData(format!("non-finite depth {bad}")));
        }
        let data = data
            .into_iter()
            .map(|d| if d > 0.0 { d } else { Self::INVALID })
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u] = if value > 0.0 { value } else { Self::INVALID };
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.get(u, v) > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    /// Half-size depth map averaging only valid source pixels; blocks with
    /// no valid pixel become invalid.
    pub fn downsample(&self) -> Result<DepthImage, ImgError> {
        if self.width < 2 || self.height < 2 {
            return Err(ImgError::TooSmall {
                width: self.width,
                height: self.height,
                min: 2,
            });
        }
        let w = self.width / 2;
        let h = self.height / 2;
        let mut out = DepthImage::invalid(w, h);
        for v in 0..h {
            for u in 0..w {
                let mut sum = 0.0;
                let mut n = 0usize;
                for (du, dv) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let d = self.get(2 * u + du, 2 * v + dv);
                    if d > 0.0 {
                        sum += d;
                        n += 1;
                    }
                }
                if n > 0 {
                    out.set(u, v, sum / n as f64);
                }
            }
        }
        Ok(out)
    }

    /// Bilinear depth interpolation; out-of-domain if any of the four
    /// neighbors is invalid or outside the image.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Result<f64, SampleError> {
        if !u.is_finite() || !v.is_finite() {
            return Err(SampleError::NonFinite);
        }
        if self.width < 2 || self.height < 2 {
            return Err(SampleError::OutOfDomain);
        }
        let max_u = (self.width - 1) as f64;
        let max_v = (self.height - 1) as f64;
        if u < 0.0 || v < 0.0 || u > max_u || v > max_v {
            return Err(SampleError::OutOfDomain);
        }
        let u0 = (u.floor() as usize).min(self.width - 2);
        let v0 = (v.floor() as usize).min(self.height - 2);
        let a = u - u0 as f64;
        let b = v - v0 as f64;
        let p00 = self.get(u0, v0);
        let p10 = self.get(u0 + 1, v0);
        let p01 = self.get(u0, v0 + 1);
        let p11 = self.get(u0 + 1, v0 + 1);
        if p00 <= 0.0 || p10 <= 0.0 || p01 <= 0.0 || p11 <= 0.0 {
            return Err(SampleError::OutOfDomain);
        }
        Ok((1.0 - b) * ((1.0 - a) * p00 + a * p10) + b * ((1.0 - a) * p01 + a * p11))
    }
}

/// Interleaved RGB raster with channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self, ImgError> {
        if data.len() != width * height {
            return Err(ImgError::InvalidData(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data
            .iter()
            .any(|px| px.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(ImgError::InvalidData(
                "color channel outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: [f64; 3]) {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u] = value;
    }
}

/// Rec. 601 luma: 0.299 R + 0.587 G + 0.114 B.
pub fn to_grayscale(rgb: &ColorImage) -> Image {
    let data = rgb
        .data()
        .iter()
        .map(|[r, g, b]| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0))
        .collect();
    Image::from_data(rgb.width(), rgb.height(), data).expect("luma of valid rgb is valid")
}
