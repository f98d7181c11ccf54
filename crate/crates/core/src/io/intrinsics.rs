use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::PinholeCamera;

use super::IoError;

/// On-disk camera description. `depth_scale` converts stored 16-bit depth
/// units to meters (meters = stored * depth_scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub depth_scale: f64,
}

impl Intrinsics {
    pub fn camera(&self) -> Result<PinholeCamera, crate::geom::GeomError> {
        PinholeCamera::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        let parsed: Intrinsics = serde_json::from_str(&text).map_err(|e| IoError::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        if !(parsed.depth_scale > 0.0) {
            return Err(IoError::format(
                path,
                format!("depth_scale must be positive, got {}", parsed.depth_scale),
            ));
        }
        parsed
            .camera()
            .map_err(|e| IoError::format(path, e.to_string()))?;
        Ok(parsed)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("intrinsics serialize");
        std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e))
    }
}
