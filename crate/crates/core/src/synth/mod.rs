//! Synthetic pseudo-RGBD generator: analytic textured primitives rendered by
//! per-pixel ray casting, with exact depth and exact ground-truth poses.
//! Serves as the oracle for the tracking and fusion test suites.

mod scene;
mod sequence;

pub use scene::{render, Primitive, SyntheticScene, Texture};
pub use sequence::{
    generate_frames, write_sequence, GeneratedSequence, NoiseParams, SceneSpec, TrajectorySpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}
