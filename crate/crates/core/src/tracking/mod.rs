//! Frame-to-keyframe photometric odometry: robust Gauss-Newton over an image
//! pyramid, rotation-only at the coarsest level and full SE(3) below, with
//! overlap-driven keyframe creation and failure accounting.

mod cost;
mod odometry;
mod solver;

pub use cost::{photometric_cost, photometric_squared_cost, CostEval};
pub use odometry::{
    run_odometry, FrameDiagnostics, OdometryResult, PseudoRgbdFrame, TrajectoryPoint,
};
pub use solver::{gauss_newton_level, track_frame, Dof, LevelOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Pose;
use crate::imgproc::{DepthImage, Image, ImagePyramid};

#[derive(Debug, Clone, Error)]
pub enum TrackError {
    #[error("keyframe has no valid depth pixels at level {level}")]
    DegenerateFrame { level: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("pyramid level {level} out of range (pyramid has {levels})")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("incompatible pyramids: {0}")]
    IncompatiblePyramids(String),
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("first frame has no valid depth; cannot initialize")]
    InitializationFailed,
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImgError),
}

/// Tuning knobs for the pyramidal tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Pyramid depth (level 0 = full resolution). At least 2.
    pub pyramid_levels: usize,
    /// Residual saturation threshold in intensity units.
    pub gamma: f64,
    /// Gauss-Newton iteration cap per level.
    pub max_iterations: usize,
    /// Stop once the twist update norm falls below this.
    pub convergence_eps: f64,
    /// Overlap ratio below which the current frame becomes a new keyframe.
    pub keyframe_ratio: f64,
    /// Minimum warped-in-view pixel count for a track to count as converged.
    pub min_valid_pixels: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 4,
            gamma: 0.1,
            max_iterations: 30,
            convergence_eps: 1e-7,
            keyframe_ratio: 0.5,
            min_valid_pixels: 100,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        if self.pyramid_levels < 2 {
            return Err(TrackError::InvalidConfig(format!(
                "pyramid_levels must be >= 2, got {}",
                self.pyramid_levels
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(TrackError::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.keyframe_ratio > 0.0 && self.keyframe_ratio <= 1.0) {
            return Err(TrackError::InvalidConfig(format!(
                "keyframe_ratio must be in (0, 1], got {}",
                self.keyframe_ratio
            )));
        }
        if self.max_iterations == 0 {
            return Err(TrackError::InvalidConfig("max_iterations must be > 0".into()));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(TrackError::InvalidConfig(format!(
                "convergence_eps must be positive, got {}",
                self.convergence_eps
            )));
        }
        Ok(())
    }
}

/// Reference frame for tracking: an intensity+depth pyramid anchored at a
/// world pose (keyframe-to-world).
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub id: usize,
    pub timestamp: f64,
    pub pyramid: ImagePyramid,
    pub pose_world: Pose,
}

impl Keyframe {
    pub fn new(
        id: usize,
        timestamp: f64,
        intensity: Image,
        depth: DepthImage,
        camera: crate::geom::PinholeCamera,
        levels: usize,
        pose_world: Pose,
    ) -> Result<Self, TrackError> {
        if levels < 2 {
            return Err(TrackError::InvalidConfig(format!(
                "keyframe pyramid needs >= 2 levels, got {levels}"
            )));
        }
        if depth.valid_count() == 0 {
            return Err(TrackError::DegenerateFrame { level: 0 });
        }
        let pyramid = ImagePyramid::build(intensity, Some(depth), camera, levels)?;
        Ok(Self {
            id,
            timestamp,
            pyramid,
            pose_world,
        })
    }
}

/// Outcome of tracking one frame against a keyframe.
#[derive(Debug, Clone)]
pub struct TrackResult {
    /// Estimated keyframe-to-current transform.
    pub pose_ck: Pose,
    /// Fraction of the keyframe's valid-depth pixels that warp in view at
    /// level 0 under the final pose.
    pub overlap_ratio: f64,
    /// Mean saturated residual at level 0 under the final pose.
    pub final_cost: f64,
    /// True when the finest full-DoF stage converged, enough pixels stayed
    /// in view, and the final cost sits clearly below the saturation
    /// ceiling.
    pub converged: bool,
    /// Iterations spent per stage, coarsest first.
    pub iterations_per_level: Vec<usize>,
}
