//! File formats spoken by the pipeline: intrinsics JSON, 8/16-bit PNG images,
//! TUM trajectories, sequence manifests, ASCII PLY meshes, TSDF volume dumps
//! and metric reports.

mod intrinsics;
mod manifest;
mod ply;
mod png;
mod report;
pub mod tum;
mod volume;

pub use intrinsics::Intrinsics;
pub use manifest::{write_manifest, FrameEntry, FrameSpec, ManifestSpec, SequenceManifest};
pub use ply::write_ply;
pub use png::{load_depth_png, load_rgb_png, save_depth_png, save_rgb_png};
pub use report::{write_metrics_csv, write_metrics_json, MetricsReport, PerImageMetrics};
pub use tum::{read_tum_trajectory, write_tum_trajectory, TrajectoryEntry};
pub use volume::dump_volume;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

impl IoError {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: &std::path::Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}
