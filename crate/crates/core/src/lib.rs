//! Dense photometric visual odometry and volumetric fusion for pseudo-RGBD
//! sequences.
//!
//! The pipeline consumes sequences of RGB images paired with dense depth maps
//! (predicted or sensed), tracks the 6-DoF camera pose against pseudo-RGBD
//! keyframes by minimizing a robust photometric cost over an image pyramid,
//! fuses the registered keyframe depth maps into a truncated signed distance
//! volume, and extracts a triangle mesh. The eval module scores depth maps
//! against ground truth with the standard monocular-depth error protocol, and
//! the synth module renders analytic scenes with exact ground truth for
//! testing.

// Validity checks are written `!(x > 0.0)` so NaN classifies as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod fusion;
pub mod geom;
pub mod imgproc;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod tracking;

pub use geom::{GeomError, PinholeCamera, Pose, Projection, Twist};
pub use imgproc::{ColorImage, DepthImage, Image, ImagePyramid};
pub use tracking::{Keyframe, TrackResult, TrackerConfig};
