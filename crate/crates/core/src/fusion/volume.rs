use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{PinholeCamera, Pose};
use crate::imgproc::{ColorImage, DepthImage};
use crate::tracking::Keyframe;

use super::{extract_mesh, FusionError, TriangleMesh};

/// Fusion knobs. `trunc` defaults to four voxels; bounds are auto-computed
/// from the backprojected depth maps when not given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Voxel edge length in meters.
    pub voxel_size: f64,
    /// Truncation band half-width τ in meters; `None` means 4 * voxel_size.
    pub trunc: Option<f64>,
    /// Axis-aligned volume bounds in meters, `[min, max]` per axis.
    pub bounds: Option<[[f64; 3]; 2]>,
    /// Refuse to allocate volumes larger than this.
    pub memory_cap_bytes: u64,
    /// Also average per-voxel colors when RGB is available.
    pub with_color: bool,
    /// Write the raw tsdf/weight arrays next to the mesh.
    pub dump_volume: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.01,
            trunc: None,
            bounds: None,
            memory_cap_bytes: 2 * 1024 * 1024 * 1024,
            with_color: false,
            dump_volume: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.voxel_size > 0.0) {
            return Err(FusionError::InvalidConfig(format!(
                "voxel_size must be positive, got {}",
                self.voxel_size
            )));
        }
        if let Some(t) = self.trunc {
            if !(t > 0.0) {
                return Err(FusionError::InvalidConfig(format!(
                    "trunc must be positive, got {t}"
                )));
            }
        }
        if let Some([lo, hi]) = self.bounds {
            for a in 0..3 {
                if !(hi[a] > lo[a]) {
                    return Err(FusionError::InvalidConfig(format!(
                        "bounds are empty on axis {a}: [{}, {}]",
                        lo[a], hi[a]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn truncation(&self) -> f64 {
        self.trunc.unwrap_or(4.0 * self.voxel_size)
    }
}

/// Axis-aligned voxel grid of truncated signed distances and accumulation
/// weights. `origin` is the center of voxel (0, 0, 0); voxel (i, j, k) sits
/// at `origin + (i, j, k) * voxel_size`.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    origin: Vector3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
    trunc: f64,
    tsdf: Vec<f64>,
    weight: Vec<f64>,
    color: Option<Vec<[f64; 3]>>,
}

impl TsdfVolume {
    pub fn new(
        origin: Vector3<f64>,
        voxel_size: f64,
        dims: [usize; 3],
        trunc: f64,
        with_color: bool,
        memory_cap_bytes: u64,
    ) -> Result<Self, FusionError> {
        if !(voxel_size > 0.0) || !(trunc > 0.0) {
            return Err(FusionError::InvalidConfig(
                "voxel_size and trunc must be positive".into(),
            ));
        }
        if dims.iter().any(|d| *d < 2) {
            return Err(FusionError::InvalidConfig(format!(
                "volume dims {dims:?} too small, need >= 2 per axis"
            )));
        }
        let n = dims[0] as u64 * dims[1] as u64 * dims[2] as u64;
        let per_voxel = 16 + if with_color { 24 } else { 0 };
        let required = n * per_voxel;
        if required > memory_cap_bytes {
            return Err(FusionError::MemoryCap {
                dims,
                required_bytes: required,
                cap_bytes: memory_cap_bytes,
            });
        }
        let n = n as usize;
        Ok(Self {
            origin,
            voxel_size,
            dims,
            trunc,
            tsdf: vec![0.0; n],
            weight: vec![0.0; n],
            color: with_color.then(|| vec![[0.0; 3]; n]),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn truncation(&self) -> f64 {
        self.trunc
    }

    pub fn voxel_count(&self) -> usize {
        self.tsdf.len()
    }

    pub fn tsdf(&self) -> &[f64] {
        &self.tsdf
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn color(&self) -> Option<&[[f64; 3]]> {
        self.color.as_deref()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    /// Write an analytic signed distance field into the volume with unit
    /// weight. Test scaffolding for surface extraction.
    pub fn fill_with<F: Fn(&Vector3<f64>) -> f64>(&mut self, sdf: F) {
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let idx = self.index(i, j, k);
                    let d = sdf(&self.voxel_center(i, j, k));
                    self.tsdf[idx] = d.clamp(-self.trunc, self.trunc);
                    self.weight[idx] = 1.0;
                }
            }
        }
    }

    /// Integrate one depth map taken from `pose_world` (camera-to-world).
    ///
    /// Every voxel center is transformed into the camera, projected, and
    /// compared against the observed depth at the nearest pixel: the
    /// projective signed distance `D(p) - z` is clamped to `[-trunc, trunc]`
    /// and folded into the per-voxel running average with unit weight.
    /// Voxels behind the camera, out of view, on invalid depth, or more than
    /// `trunc` behind the observed surface are skipped.
    pub fn integrate(
        &mut self,
        depth: &DepthImage,
        color: Option<&ColorImage>,
        cam: &PinholeCamera,
        pose_world: &Pose,
    ) -> Result<(), FusionError> {
        if depth.width() != cam.width || depth.height() != cam.height {
            return Err(FusionError::DepthSizeMismatch {
                got_w: depth.width(),
                got_h: depth.height(),
                cam_w: cam.width,
                cam_h: cam.height,
            });
        }
        let world_to_cam = pose_world.inverse();
        let rot = *world_to_cam.rotation();
        let base = rot * self.origin + world_to_cam.translation();
        let ex = rot.column(0) * self.voxel_size;
        let ey = rot.column(1) * self.voxel_size;
        let ez = rot.column(2) * self.voxel_size;
        let max_u = (cam.width - 1) as f64;
        let max_v = (cam.height - 1) as f64;

        for k in 0..self.dims[2] {
            let pk = base + ez * k as f64;
            for j in 0..self.dims[1] {
                let pj = pk + ey * j as f64;
                for i in 0..self.dims[0] {
                    let p = pj + ex * i as f64;
                    if p.z <= 0.0 {
                        continue;
                    }
                    let inv_z = 1.0 / p.z;
                    let u = cam.fx * p.x * inv_z + cam.cx;
                    let v = cam.fy * p.y * inv_z + cam.cy;
                    if u < 0.0 || v < 0.0 || u > max_u || v > max_v {
                        continue;
                    }
                    let ui = (u + 0.5) as usize;
                    let vi = (v + 0.5) as usize;
                    let d = depth.get(ui.min(cam.width - 1), vi.min(cam.height - 1));
                    if d <= 0.0 {
                        continue;
                    }
                    let sdf = d - p.z;
                    if sdf < -self.trunc {
                        continue;
                    }
                    let clamped = sdf.min(self.trunc);
                    let idx = self.index(i, j, k);
                    let w = self.weight[idx];
                    self.tsdf[idx] = (self.tsdf[idx] * w + clamped) / (w + 1.0);
                    if let (Some(colors), Some(img)) = (self.color.as_mut(), color) {
                        let px = img.get(ui.min(cam.width - 1), vi.min(cam.height - 1));
                        let c = &mut colors[idx];
                        for ch in 0..3 {
                            c[ch] = (c[ch] * w + px[ch]) / (w + 1.0);
                        }
                    }
                    self.weight[idx] = w + 1.0;
                }
            }
        }
        Ok(())
    }
}

/// One registered view ready for fusion.
#[derive(Debug, Clone)]
pub struct FusionView {
    pub depth: DepthImage,
    pub color: Option<ColorImage>,
    pub camera: PinholeCamera,
    pub pose_world: Pose,
}

#[derive(Debug, Clone)]
pub struct FusionStats {
    pub dims: [usize; 3],
    pub voxel_count: usize,
    pub views_integrated: usize,
    pub integrate_seconds: f64,
}

fn auto_bounds(views: &[FusionView], margin: f64) -> Result<([f64; 3], [f64; 3]), FusionError> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for view in views {
        let cam = &view.camera;
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d = view.depth.get(u, v);
                if d <= 0.0 {
                    continue;
                }
                let p_cam = Vector3::new(
                    (u as f64 - cam.cx) / cam.fx * d,
                    (v as f64 - cam.cy) / cam.fy * d,
                    d,
                );
                let p = view.pose_world.transform(&p_cam);
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        }
    }
    if lo.iter().any(|x| !x.is_finite()) {
        return Err(FusionError::EmptyBounds);
    }
    for a in 0..3 {
        lo[a] -= margin;
        hi[a] += margin;
    }
    Ok((lo, hi))
}

/// Allocate a volume covering the given views, integrate them all, and
/// extract the zero isosurface.
pub fn fuse_views(
    views: &[FusionView],
    cfg: &FusionConfig,
) -> Result<(TriangleMesh, TsdfVolume, FusionStats), FusionError> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(FusionError::NoKeyframes);
    }
    let trunc = cfg.truncation();
    let (lo, hi) = match cfg.bounds {
        Some([lo, hi]) => (lo, hi),
        None => auto_bounds(views, trunc)?,
    };
    let dims = [
        (((hi[0] - lo[0]) / cfg.voxel_size).ceil() as usize + 1).max(2),
        (((hi[1] - lo[1]) / cfg.voxel_size).ceil() as usize + 1).max(2),
        (((hi[2] - lo[2]) / cfg.voxel_size).ceil() as usize + 1).max(2),
    ];
    let mut volume = TsdfVolume::new(
        Vector3::new(lo[0], lo[1], lo[2]),
        cfg.voxel_size,
        dims,
        trunc,
        cfg.with_color,
        cfg.memory_cap_bytes,
    )?;
    let start = std::time::Instant::now();
    for view in views {
        volume.integrate(
            &view.depth,
            view.color.as_ref(),
            &view.camera,
            &view.pose_world,
        )?;
    }
    let integrate_seconds = start.elapsed().as_secs_f64();
    let mesh = extract_mesh(&volume);
    let stats = FusionStats {
        dims,
        voxel_count: volume.voxel_count(),
        views_integrated: views.len(),
        integrate_seconds,
    };
    Ok((mesh, volume, stats))
}

/// Fuse tracked keyframes: their level-0 depth maps are integrated at their
/// world poses.
pub fn fuse_keyframes(
    keyframes: &[Keyframe],
    cfg: &FusionConfig,
) -> Result<(TriangleMesh, TsdfVolume, FusionStats), FusionError> {
    let views: Vec<FusionView> = keyframes
        .iter()
        .map(|kf| {
            let level0 = kf.pyramid.level(0);
            FusionView {
                depth: level0
                    .depth
                    .as_ref()
                    .expect("keyframes carry depth")
                    .clone(),
                color: None,
                camera: level0.camera,
                pose_world: kf.pose_world,
            }
        })
        .collect();
    fuse_views(&views, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn camera() -> PinholeCamera {
        PinholeCamera::new(60.0, 60.0, 31.5, 23.5, 64, 48).unwrap()
    }

    fn plane_depth(cam: &PinholeCamera, z: f64) -> DepthImage {
        DepthImage::from_data(
            cam.width,
            cam.height,
            vec![z; cam.width * cam.height],
        )
        .unwrap()
    }

    fn small_volume(trunc: f64) -> TsdfVolume {
        // Volume straddling the plane z = 1 in front of an identity camera.
        TsdfVolume::new(
            Vector3::new(-0.2, -0.2, 0.8),
            0.025,
            [17, 17, 17],
            trunc,
            false,
            u64::MAX,
        )
        .unwrap()
    }

    #[test]
    fn projective_sdf_of_frontoparallel_plane() {
        let cam = camera();
        let depth = plane_depth(&cam, 1.0);
        let mut vol = small_volume(0.05);
        vol.integrate(&depth, None, &cam, &Pose::identity()).unwrap();
        // Voxel at camera z = 0.975 on a ray: tsdf = 1.0 - 0.975 = +0.025.
        // With origin z = 0.8 and voxel 0.025 that is k = 7.
        let idx = vol.index(8, 8, 7);
        assert_relative_eq!(vol.tsdf()[idx], 0.025, epsilon = 1e-12);
        assert_eq!(vol.weight()[idx], 1.0);
        // Voxel exactly on the surface: k = 8 -> z = 1.0.
        let idx = vol.index(8, 8, 8);
        assert_relative_eq!(vol.tsdf()[idx], 0.0, epsilon = 1e-12);
        // Far behind the surface: skipped, never observed.
        let idx = vol.index(8, 8, 16);
        assert_eq!(vol.weight()[idx], 0.0);
    }

    #[test]
    fn integrating_twice_is_idempotent_on_tsdf() {
        let cam = camera();
        let depth = plane_depth(&cam, 1.0);
        let mut once = small_volume(0.05);
        once.integrate(&depth, None, &cam, &Pose::identity()).unwrap();
        let mut twice = once.clone();
        twice.integrate(&depth, None, &cam, &Pose::identity()).unwrap();
        for (a, b) in once.tsdf().iter().zip(twice.tsdf()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        for (wa, wb) in once.weight().iter().zip(twice.weight()) {
            if *wa > 0.0 {
                assert_eq!(*wb, 2.0 * wa);
            }
        }
    }

    #[test]
    fn average_is_order_independent_for_two_maps() {
        let cam = camera();
        let a = plane_depth(&cam, 1.0);
        let b = plane_depth(&cam, 1.02);
        let mut ab = small_volume(0.08);
        ab.integrate(&a, None, &cam, &Pose::identity()).unwrap();
        ab.integrate(&b, None, &cam, &Pose::identity()).unwrap();
        let mut ba = small_volume(0.08);
        ba.integrate(&b, None, &cam, &Pose::identity()).unwrap();
        ba.integrate(&a, None, &cam, &Pose::identity()).unwrap();
        for (idx, (x, y)) in ab.tsdf().iter().zip(ba.tsdf()).enumerate() {
            if ab.weight()[idx] == 2.0 && ba.weight()[idx] == 2.0 {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn clamp_invariant_holds_after_any_sequence() {
        let cam = camera();
        let mut vol = small_volume(0.05);
        for z in [0.9, 1.0, 1.1, 1.3] {
            vol.integrate(&plane_depth(&cam, z), None, &cam, &Pose::identity())
                .unwrap();
        }
        let t = vol.truncation();
        assert!(vol.tsdf().iter().all(|d| -t <= *d && *d <= t));
        assert!(vol.weight().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn memory_cap_reports_required_size() {
        let err = TsdfVolume::new(
            Vector3::zeros(),
            0.001,
            [1000, 1000, 1000],
            0.004,
            false,
            1024,
        )
        .unwrap_err();
        match err {
            FusionError::MemoryCap {
                required_bytes,
                cap_bytes,
                dims,
            } => {
                assert_eq!(dims, [1000, 1000, 1000]);
                assert_eq!(cap_bytes, 1024);
                assert_eq!(required_bytes, 16_000_000_000);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_view_list_is_an_error() {
        assert!(matches!(
            fuse_views(&[], &FusionConfig::default()),
            Err(FusionError::NoKeyframes)
        ));
    }
}
