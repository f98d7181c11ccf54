//! Depth-map evaluation with per-image scale alignment, plus trajectory and
//! failure statistics.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgproc::DepthImage;
use crate::tracking::OdometryResult;

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("no jointly valid pixels between prediction and ground truth")]
    NoJointlyValidPixels,
    #[error("median of predicted depth is zero; cannot scale")]
    ZeroMedian,
    #[error("all pixels were excluded from the log-RMSE term")]
    AllExcludedFromLog,
    #[error("cannot aggregate an empty list of metric records")]
    EmptyAggregate,
    #[error("trajectories differ in length: {0} vs {1}")]
    TrajectoryLengthMismatch(usize, usize),
    #[error("need at least {0} trajectory points")]
    TrajectoryTooShort(usize),
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImgError),
}

/// Per-image scale alignment conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Evaluate the raw prediction.
    None,
    /// s = median(gt) / median(pred).
    MedianRatio,
    /// s = median(gt / pred), elementwise over jointly valid pixels.
    RatioMedian,
}

impl std::str::FromStr for ScaleMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ScaleMode::None),
            "median_ratio" => Ok(ScaleMode::MedianRatio),
            "ratio_median" => Ok(ScaleMode::RatioMedian),
            other => Err(format!(
                "unknown scale mode {other:?}; expected none, median_ratio or ratio_median"
            )),
        }
    }
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScaleMode::None => "none",
            ScaleMode::MedianRatio => "median_ratio",
            ScaleMode::RatioMedian => "ratio_median",
        })
    }
}

/// The seven-metric depth evaluation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_pixels: usize,
}

/// Lower median: for even counts the smaller of the two central elements.
/// Fixed so tests can be bit-exact.
fn lower_median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

fn joint_mask(pred: &DepthImage, gt: &DepthImage) -> Result<Vec<usize>, EvalError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(EvalError::Image(crate::imgproc::ImgError::DimensionMismatch {
            expected_w: gt.width(),
            expected_h: gt.height(),
            got_w: pred.width(),
            got_h: pred.height(),
        }));
    }
    let idx: Vec<usize> = (0..pred.data().len())
        .filter(|i| pred.data()[*i] > 0.0 && gt.data()[*i] > 0.0)
        .collect();
    if idx.is_empty() {
        return Err(EvalError::NoJointlyValidPixels);
    }
    Ok(idx)
}

/// Align the prediction's scale to the ground truth. Returns the scaled
/// prediction and the scale factor that was applied.
pub fn align_scale(
    pred: &DepthImage,
    gt: &DepthImage,
    mode: ScaleMode,
) -> Result<(DepthImage, f64), EvalError> {
    let mask = joint_mask(pred, gt)?;
    let s = match mode {
        ScaleMode::None => 1.0,
        ScaleMode::MedianRatio => {
            let mut p: Vec<f64> = mask.iter().map(|i| pred.data()[*i]).collect();
            let mut g: Vec<f64> = mask.iter().map(|i| gt.data()[*i]).collect();
            let mp = lower_median(&mut p);
            if mp == 0.0 {
                return Err(EvalError::ZeroMedian);
            }
            lower_median(&mut g) / mp
        }
        ScaleMode::RatioMedian => {
            let mut r: Vec<f64> = mask
                .iter()
                .map(|i| gt.data()[*i] / pred.data()[*i])
                .collect();
            lower_median(&mut r)
        }
    };
    let scaled: Vec<f64> = pred
        .data()
        .iter()
        .map(|d| if *d > 0.0 { d * s } else { *d })
        .collect();
    let scaled = DepthImage::from_data(pred.width(), pred.height(), scaled)?;
    Ok((scaled, s))
}

/// Standard monocular-depth error metrics over the jointly valid mask after
/// scale alignment. `rmse` and `sq_rel` keep the units of the inputs;
/// `rmse_log` uses the natural logarithm.
pub fn depth_metrics(
    pred: &DepthImage,
    gt: &DepthImage,
    mode: ScaleMode,
) -> Result<DepthMetrics, EvalError> {
    let (scaled, _) = align_scale(pred, gt, mode)?;
    let mask = joint_mask(&scaled, gt)?;
    let n = mask.len() as f64;
    let mut abs_rel = 0.0;
    let mut sq_rel = 0.0;
    let mut sq = 0.0;
    let mut sq_log = 0.0;
    let mut log_count = 0usize;
    let mut d1 = 0usize;
    let mut d2 = 0usize;
    let mut d3 = 0usize;
    const T1: f64 = 1.25;
    const T2: f64 = 1.25 * 1.25;
    const T3: f64 = 1.25 * 1.25 * 1.25;
    for i in &mask {
        let p = scaled.data()[*i];
        let g = gt.data()[*i];
        let e = g - p;
        abs_rel += e.abs() / g;
        sq_rel += e * e / g;
        sq += e * e;
        if p > 0.0 {
            let l = g.ln() - p.ln();
            sq_log += l * l;
            log_count += 1;
        }
        let ratio = (p / g).max(g / p);
        if ratio < T1 {
            d1 += 1;
        }
        if ratio < T2 {
            d2 += 1;
        }
        if ratio < T3 {
            d3 += 1;
        }
    }
    if log_count == 0 {
        return Err(EvalError::AllExcludedFromLog);
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / log_count as f64).sqrt(),
        delta1: d1 as f64 / n,
        delta2: d2 as f64 / n,
        delta3: d3 as f64 / n,
        n_pixels: mask.len(),
    })
}

/// Unweighted mean of each metric across images; pixel counts are summed.
pub fn aggregate_metrics(per_image: &[DepthMetrics]) -> Result<DepthMetrics, EvalError> {
    if per_image.is_empty() {
        return Err(EvalError::EmptyAggregate);
    }
    let n = per_image.len() as f64;
    Ok(DepthMetrics {
        abs_rel: per_image.iter().map(|m| m.abs_rel).sum::<f64>() / n,
        sq_rel: per_image.iter().map(|m| m.sq_rel).sum::<f64>() / n,
        rmse: per_image.iter().map(|m| m.rmse).sum::<f64>() / n,
        rmse_log: per_image.iter().map(|m| m.rmse_log).sum::<f64>() / n,
        delta1: per_image.iter().map(|m| m.delta1).sum::<f64>() / n,
        delta2: per_image.iter().map(|m| m.delta2).sum::<f64>() / n,
        delta3: per_image.iter().map(|m| m.delta3).sum::<f64>() / n,
        n_pixels: per_image.iter().map(|m| m.n_pixels).sum(),
    })
}

/// Number of frames tracked before the failure predicate fired, or the total
/// frame count if it never did.
pub fn frames_until_failure(result: &OdometryResult) -> usize {
    result
        .failure_frame
        .unwrap_or(result.trajectory.len())
}

/// Absolute trajectory error after rigid alignment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AteResult {
    pub rmse: f64,
    pub mean: f64,
    pub max: f64,
}

/// RMS positional error between two equally long trajectories after
/// least-squares rigid alignment (rotation + translation, no scale).
pub fn absolute_trajectory_error(
    gt: &[Vector3<f64>],
    est: &[Vector3<f64>],
) -> Result<AteResult, EvalError> {
    if gt.len() != est.len() {
        return Err(EvalError::TrajectoryLengthMismatch(gt.len(), est.len()));
    }
    if gt.len() < 2 {
        return Err(EvalError::TrajectoryTooShort(2));
    }
    let n = gt.len() as f64;
    let mu_g: Vector3<f64> = gt.iter().sum::<Vector3<f64>>() / n;
    let mu_e: Vector3<f64> = est.iter().sum::<Vector3<f64>>() / n;
    let mut w = Matrix3::zeros();
    for (g, e) in gt.iter().zip(est) {
        w += (g - mu_g) * (e - mu_e).transpose();
    }
    let svd = w.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rot = u * s * v_t;
    let t = mu_g - rot * mu_e;

    let mut sq = 0.0;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (g, e) in gt.iter().zip(est) {
        let err = (g - (rot * e + t)).norm();
        sq += err * err;
        sum += err;
        max = max.max(err);
    }
    Ok(AteResult {
        rmse: (sq / n).sqrt(),
        mean: sum / n,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Twist;
    use approx::assert_relative_eq;

    fn depth(values: &[f64]) -> DepthImage {
        DepthImage::from_data(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn identical_inputs_are_perfect() {
        let d = depth(&[1.0, 2.0, 3.0, 0.0]);
        for mode in [ScaleMode::None, ScaleMode::MedianRatio, ScaleMode::RatioMedian] {
            let m = depth_metrics(&d, &d, mode).unwrap();
            assert_eq!(m.abs_rel, 0.0);
            assert_eq!(m.sq_rel, 0.0);
            assert_eq!(m.rmse, 0.0);
            assert_eq!(m.rmse_log, 0.0);
            assert_eq!(m.delta1, 1.0);
            assert_eq!(m.delta2, 1.0);
            assert_eq!(m.delta3, 1.0);
            assert_eq!(m.n_pixels, 3);
            let (_, s) = align_scale(&d, &d, mode).unwrap();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn median_ratio_hand_example() {
        // gt [2, 4], pred [1, 2]: lower medians are 2 and 1, s = 2.
        let gt = depth(&[2.0, 4.0]);
        let pred = depth(&[1.0, 2.0]);
        let (scaled, s) = align_scale(&pred, &gt, ScaleMode::MedianRatio).unwrap();
        assert_eq!(s, 2.0);
        assert_eq!(scaled.data(), &[2.0, 4.0]);
    }

    #[test]
    fn ratio_median_hand_example() {
        // gt [2, 4], pred [1, 1]: elementwise ratios [2, 4], lower median 2.
        let gt = depth(&[2.0, 4.0]);
        let pred = depth(&[1.0, 1.0]);
        let (scaled, s) = align_scale(&pred, &gt, ScaleMode::RatioMedian).unwrap();
        assert_eq!(s, 2.0);
        assert_eq!(scaled.data(), &[2.0, 2.0]);
    }

    #[test]
    fn metrics_hand_example_with_median_ratio() {
        // gt [2, 4], pred [1, 8]. Lower medians: gt 2, pred 1, so s = 2 and
        // scaled pred = [2, 16]. abs_rel = (0/2 + 12/4)/2 = 1.5;
        // ratios: (2/2, 16/4) = (1, 4): delta1 counts ratio 1 only.
        let gt = depth(&[2.0, 4.0]);
        let pred = depth(&[1.0, 8.0]);
        let m = depth_metrics(&pred, &gt, ScaleMode::MedianRatio).unwrap();
        assert_relative_eq!(m.abs_rel, 1.5, epsilon = 1e-12);
        assert_relative_eq!(m.sq_rel, (0.0 + 144.0 / 4.0) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.rmse, (144.0f64 / 2.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.delta1, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.delta2, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.delta3, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn doubled_prediction_is_perfect_under_scaling() {
        let gt = depth(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let pred = depth(&[2.0, 4.0, 6.0, 8.0, 10.0]);
        for mode in [ScaleMode::MedianRatio, ScaleMode::RatioMedian] {
            let m = depth_metrics(&pred, &gt, mode).unwrap();
            assert_relative_eq!(m.abs_rel, 0.0, epsilon = 1e-15);
            assert_eq!(m.delta1, 1.0);
        }
        // Without scaling, abs_rel = |g - 2g| / g = 1 exactly.
        let m = depth_metrics(&pred, &gt, ScaleMode::None).unwrap();
        assert_relative_eq!(m.abs_rel, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scale_invariance_of_scaled_modes() {
        let gt = depth(&[1.0, 2.5, 0.7, 3.3, 1.9, 0.0, 2.2]);
        let pred = depth(&[1.2, 2.0, 0.9, 3.0, 2.1, 1.0, 0.0]);
        for mode in [ScaleMode::MedianRatio, ScaleMode::RatioMedian] {
            let base = depth_metrics(&pred, &gt, mode).unwrap();
            for c in [0.1, 10.0] {
                let scaled_pred = depth(
                    &pred
                        .data()
                        .iter()
                        .map(|d| if *d > 0.0 { d * c } else { *d })
                        .collect::<Vec<_>>(),
                );
                let m = depth_metrics(&scaled_pred, &gt, mode).unwrap();
                assert_relative_eq!(m.abs_rel, base.abs_rel, max_relative = 1e-12);
                assert_relative_eq!(m.rmse, base.rmse, max_relative = 1e-12);
                assert_relative_eq!(m.rmse_log, base.rmse_log, max_relative = 1e-12);
                assert_eq!(m.delta1, base.delta1);
            }
        }
    }

    #[test]
    fn rmse_is_linear_in_a_uniform_offset_without_scaling() {
        let gt = depth(&[2.0; 16]);
        for offset in [0.01, 0.02, 0.04] {
            let pred = depth(&[2.0 + offset; 16]);
            let m = depth_metrics(&pred, &gt, ScaleMode::None).unwrap();
            assert_relative_eq!(m.rmse, offset, epsilon = 1e-12);
        }
    }

    #[test]
    fn deltas_are_ordered() {
        let gt = depth(&[1.0, 2.0, 3.0, 4.0]);
        let pred = depth(&[1.1, 3.0, 2.0, 9.0]);
        let m = depth_metrics(&pred, &gt, ScaleMode::None).unwrap();
        assert!(m.delta1 <= m.delta2 && m.delta2 <= m.delta3 && m.delta3 <= 1.0);
    }

    #[test]
    fn disjoint_masks_are_an_error() {
        let a = depth(&[1.0, 0.0]);
        let b = depth(&[0.0, 1.0]);
        assert!(matches!(
            depth_metrics(&a, &b, ScaleMode::None),
            Err(EvalError::NoJointlyValidPixels)
        ));
    }

    #[test]
    fn aggregate_means_and_sums() {
        let a = DepthMetrics {
            abs_rel: 0.1,
            sq_rel: 0.2,
            rmse: 1.0,
            rmse_log: 0.3,
            delta1: 0.9,
            delta2: 0.95,
            delta3: 1.0,
            n_pixels: 10,
        };
        let mut b = a;
        b.abs_rel = 0.3;
        b.n_pixels = 30;
        let agg = aggregate_metrics(&[a, b]).unwrap();
        assert_relative_eq!(agg.abs_rel, 0.2, epsilon = 1e-15);
        assert_eq!(agg.n_pixels, 40);
        assert_eq!(aggregate_metrics(&[a]).unwrap(), a);
        assert!(aggregate_metrics(&[]).is_err());
    }

    #[test]
    fn ate_of_rigidly_displaced_trajectory_is_zero() {
        let gt: Vec<Vector3<f64>> = (0..20)
            .map(|i| Vector3::new(i as f64 * 0.1, (i as f64 * 0.2).sin(), 0.3))
            .collect();
        let offset = Twist::new(
            Vector3::new(0.2, -0.1, 0.4),
            Vector3::new(1.0, 2.0, -0.5),
        )
        .exp();
        let est: Vec<Vector3<f64>> = gt.iter().map(|p| offset.transform(p)).collect();
        let ate = absolute_trajectory_error(&gt, &est).unwrap();
        assert!(ate.rmse < 1e-12, "rmse {}", ate.rmse);
    }

    #[test]
    fn ate_measures_residual_error() {
        let gt: Vec<Vector3<f64>> = (0..10)
            .map(|i| Vector3::new(i as f64, 0.0, 0.0))
            .collect();
        let mut est = gt.clone();
        est[5].y += 1.0;
        let ate = absolute_trajectory_error(&gt, &est).unwrap();
        assert!(ate.rmse > 0.1 && ate.max > ate.mean);
        assert!(absolute_trajectory_error(&gt, &est[..5]).is_err());
    }

    #[test]
    fn lower_median_convention() {
        let mut even = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(lower_median(&mut even), 2.0);
        let mut odd = [5.0, 1.0, 3.0];
        assert_eq!(lower_median(&mut odd), 3.0);
    }
}
