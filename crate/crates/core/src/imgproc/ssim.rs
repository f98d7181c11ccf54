use super::{Image, ImgError};

/// SSIM stabilizers for data in [0, 1]: (0.01)^2 and (0.03)^2.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// Default SSIM window side length.
pub const SSIM_DEFAULT_WINDOW: usize = 7;

/// Per-pixel SSIM map plus its mean.
#[derive(Debug, Clone)]
pub struct Ssim {
    pub map: Image,
    pub mean: f64,
}

/// Structural similarity between two images of identical size, computed over
/// square windows of side `window` centered at each pixel. Windows are
/// clipped at the image borders, so the map covers the full image.
pub fn ssim(a: &Image, b: &Image, window: usize) -> Result<Ssim, ImgError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(ImgError::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    if window < 3 || window.is_multiple_of(2) {
        return Err(ImgError::InvalidWindow(window));
    }
    let (w, h) = (a.width(), a.height());
    let r = window / 2;
    let mut map = Image::new(w, h);
    let mut sum = 0.0;
    for v in 0..h {
        let v0 = v.saturating_sub(r);
        let v1 = (v + r).min(h - 1);
        for u in 0..w {
            let u0 = u.saturating_sub(r);
            let u1 = (u + r).min(w - 1);
            let n = ((u1 - u0 + 1) * (v1 - v0 + 1)) as f64;
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for vv in v0..=v1 {
                for uu in u0..=u1 {
                    let x = a.get(uu, vv);
                    let y = b.get(uu, vv);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let mu_a = sa / n;
            let mu_b = sb / n;
            let var_a = (saa / n - mu_a * mu_a).max(0.0);
            let var_b = (sbb / n - mu_b * mu_b).max(0.0);
            let cov = sab / n - mu_a * mu_b;
            let s = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
            map.set(u, v, s);
            sum += s;
        }
    }
    let mean = sum / (w * h) as f64;
    Ok(Ssim { map, mean })
}

/// Per-pixel appearance residual between a target image and an image warped
/// toward it: `alpha * |t - w| + (1 - alpha) * (1 - SSIM(t, w))`. Exposed as
/// a warp-quality diagnostic.
pub fn appearance_residual(target: &Image, warped: &Image, alpha: f64) -> Result<Image, ImgError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ImgError::InvalidAlpha(alpha));
    }
    let s = ssim(target, warped, SSIM_DEFAULT_WINDOW)?;
    let (w, h) = (target.width(), target.height());
    let mut out = Image::new(w, h);
    for v in 0..h {
        for u in 0..w {
            let l1 = (target.get(u, v) - warped.get(u, v)).abs();
            out.set(u, v, alpha * l1 + (1.0 - alpha) * (1.0 - s.map.get(u, v)));
        }
    }
    Ok(out)
}
