//! TSDF voxel volume with sequential-averaging depth integration and
//! marching-cubes surface extraction.

mod mesh;
mod tables;
mod volume;

pub use mesh::{extract_mesh, TriangleMesh};
pub use volume::{fuse_keyframes, fuse_views, FusionConfig, FusionStats, FusionView, TsdfVolume};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum FusionError {
    #[error("invalid fusion configuration: {0}")]
    InvalidConfig(String),
    #[error("no keyframes to fuse")]
    NoKeyframes,
    #[error(
        "volume of {dims:?} voxels needs {required_bytes} bytes, exceeding the cap of {cap_bytes}"
    )]
    MemoryCap {
        dims: [usize; 3],
        required_bytes: u64,
        cap_bytes: u64,
    },
    #[error("no valid depth to bound the volume")]
    EmptyBounds,
    #[error("depth image is {got_w}x{got_h} but camera says {cam_w}x{cam_h}")]
    DepthSizeMismatch {
        got_w: usize,
        got_h: usize,
        cam_w: usize,
        cam_h: usize,
    },
}
