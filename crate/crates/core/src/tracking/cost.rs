use nalgebra::{Matrix6, Vector3, Vector6};

use crate::geom::{Pose, Projection};
use crate::imgproc::Image;

use super::{Keyframe, TrackError};

/// Photometric cost evaluation at one pyramid level.
#[derive(Debug, Clone)]
pub struct CostEval {
    /// Sum of saturated residuals over contributing pixels.
    pub cost: f64,
    /// Per-keyframe-pixel saturated residuals, row-major at the evaluated
    /// level; NaN marks pixels that did not contribute (invalid depth,
    /// behind camera, or warped out of view).
    pub residuals: Vec<f64>,
    /// Pixels that warped in view and contributed to the cost.
    pub valid_count: usize,
    /// Keyframe pixels with valid depth at this level.
    pub kf_valid_count: usize,
}

impl CostEval {
    pub fn mean_cost(&self) -> f64 {
        if self.valid_count == 0 {
            f64::INFINITY
        } else {
            self.cost / self.valid_count as f64
        }
    }

    pub fn overlap_ratio(&self) -> f64 {
        if self.kf_valid_count == 0 {
            0.0
        } else {
            self.valid_count as f64 / self.kf_valid_count as f64
        }
    }
}

/// Normal-equation accumulators produced in one sweep over the keyframe.
pub(super) struct Accumulated {
    pub eval: CostEval,
    /// J^T J over unsaturated pixels (6x6, twist order [omega, nu]).
    pub hessian: Matrix6<f64>,
    /// J^T r over unsaturated pixels.
    pub gradient_gn: Vector6<f64>,
    /// Truncated least-squares objective: sum of r^2 / 2 over unsaturated
    /// pixels plus gamma^2 / 2 per saturated pixel.
    pub squared_cost: f64,
}

/// Single sweep: warp every valid-depth keyframe pixel into the current
/// frame through `pose_ck`, sample bilinearly, and accumulate residuals and
/// normal equations. Residuals saturate at `gamma`; saturated pixels keep
/// contributing `gamma` to the cost but get zero weight in the normal
/// equations.
pub(super) fn accumulate(
    kf: &Keyframe,
    frame: &Image,
    pose_ck: &Pose,
    level: usize,
    gamma: f64,
) -> Result<Accumulated, TrackError> {
    let levels = kf.pyramid.num_levels();
    if level >= levels {
        return Err(TrackError::LevelOutOfRange { level, levels });
    }
    let kf_level = kf.pyramid.level(level);
    let depth = kf_level
        .depth
        .as_ref()
        .expect("keyframe pyramids always carry depth");
    let cam = &kf_level.camera;
    if frame.width() != cam.width || frame.height() != cam.height {
        return Err(TrackError::IncompatiblePyramids(format!(
            "current frame is {}x{} at level {level}, keyframe camera says {}x{}",
            frame.width(),
            frame.height(),
            cam.width,
            cam.height
        )));
    }

    let (w, h) = (cam.width, cam.height);
    let mut residuals = vec![f64::NAN; w * h];
    let mut cost = 0.0;
    let mut squared_cost = 0.0;
    let mut valid_count = 0usize;
    let mut kf_valid_count = 0usize;
    let mut hessian = Matrix6::zeros();
    let mut gradient_gn = Vector6::zeros();

    let rot = *pose_ck.rotation();
    let trans = *pose_ck.translation();
    for v in 0..h {
        for u in 0..w {
            let d = depth.get(u, v);
            if d <= 0.0 {
                continue;
            }
            kf_valid_count += 1;
            // Back-project through the keyframe depth, transform to the
            // current camera, project.
            let x_k = Vector3::new(
                (u as f64 - cam.cx) / cam.fx * d,
                (v as f64 - cam.cy) / cam.fy * d,
                d,
            );
            let x_c = rot * x_k + trans;
            let pixel = match cam.project(&x_c) {
                Projection::InView(p) => p,
                Projection::OutOfView(_) | Projection::BehindCamera => continue,
            };
            let Ok((sampled, gu, gv)) = frame.sample_bilinear_with_grad(pixel.x, pixel.y) else {
                // Bilinear support straddles the border: excluded like
                // out-of-view.
                continue;
            };
            let r = kf_level.intensity.get(u, v) - sampled;
            let saturated = r.abs() >= gamma;
            let contribution = if saturated { gamma } else { r.abs() };
            residuals[v * w + u] = contribution;
            cost += contribution;
            squared_cost += 0.5 * contribution * contribution;
            valid_count += 1;
            if saturated {
                continue;
            }

            // d r / d psi = -grad I_c . d pi / d X . d X / d psi, twist order
            // [omega, nu]; dX/d omega = -hat(x_c), dX/d nu = I.
            let inv_z = 1.0 / x_c.z;
            let gx = gu * cam.fx * inv_z;
            let gy = gv * cam.fy * inv_z;
            let gz = -(gu * cam.fx * x_c.x + gv * cam.fy * x_c.y) * inv_z * inv_z;
            // gp = (grad I_c)^T dpi/dX as a column vector. Then
            // dr/d nu = -gp and dr/d omega = -gp^T (-hat(x_c)) = gp x x_c.
            let gp = Vector3::new(gx, gy, gz);
            let j_nu = -gp;
            let j_omega = gp.cross(&x_c);
            let j = Vector6::new(j_omega.x, j_omega.y, j_omega.z, j_nu.x, j_nu.y, j_nu.z);
            hessian.syger(1.0, &j, &j, 1.0);
            gradient_gn += j * r;
        }
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..6 {
        for k in (i + 1)..6 {
            hessian[(i, k)] = hessian[(k, i)];
        }
    }

    if kf_valid_count == 0 {
        return Err(TrackError::DegenerateFrame { level });
    }

    Ok(Accumulated {
        eval: CostEval {
            cost,
            residuals,
            valid_count,
            kf_valid_count,
        },
        hessian,
        gradient_gn,
        squared_cost,
    })
}

/// Saturated photometric cost of warping the keyframe into `frame` under
/// `pose_ck` at the given pyramid level.
pub fn photometric_cost(
    kf: &Keyframe,
    frame: &Image,
    pose_ck: &Pose,
    level: usize,
    gamma: f64,
) -> Result<CostEval, TrackError> {
    accumulate(kf, frame, pose_ck, level, gamma).map(|a| a.eval)
}

/// The Gauss-Newton objective (truncated least squares: residuals squared
/// and halved, saturated pixels frozen at gamma^2/2) together with its
/// analytic gradient J^T r. This is the pair finite-difference checks
/// validate: the objective is smooth wherever no pixel sits exactly at the
/// saturation boundary.
pub fn photometric_squared_cost(
    kf: &Keyframe,
    frame: &Image,
    pose_ck: &Pose,
    level: usize,
    gamma: f64,
) -> Result<(f64, Vector6<f64>), TrackError> {
    accumulate(kf, frame, pose_ck, level, gamma).map(|a| (a.squared_cost, a.gradient_gn))
}
