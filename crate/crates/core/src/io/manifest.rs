use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Intrinsics, IoError};

/// Manifest file schema: paths are relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSpec {
    pub intrinsics: String,
    pub frames: Vec<FrameSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub rgb: String,
    pub depth: String,
    pub timestamp: f64,
}

/// One frame of a loaded sequence, with paths resolved.
#[derive(Debug, Clone)]
pub struct FrameEntry {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub timestamp: f64,
}

/// A validated pseudo-RGBD sequence: every referenced file exists, image
/// sizes match the intrinsics, and frames are sorted by timestamp.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    pub root: PathBuf,
    pub intrinsics_path: PathBuf,
    pub intrinsics: Intrinsics,
    pub frames: Vec<FrameEntry>,
}

impl SequenceManifest {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        let spec: ManifestSpec = serde_json::from_str(&text).map_err(|e| IoError::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));

        let intrinsics_path = root.join(&spec.intrinsics);
        let intrinsics = Intrinsics::load(&intrinsics_path)?;

        let mut frames = Vec::with_capacity(spec.frames.len());
        for f in &spec.frames {
            let rgb = root.join(&f.rgb);
            let depth = root.join(&f.depth);
            for p in [&rgb, &depth] {
                if !p.is_file() {
                    return Err(IoError::format(
                        path,
                        format!("referenced file does not exist: {}", p.display()),
                    ));
                }
                let (w, h) = image::image_dimensions(p).map_err(|e| IoError::Image {
                    path: p.display().to_string(),
                    source: e,
                })?;
                if w as usize != intrinsics.width || h as usize != intrinsics.height {
                    return Err(IoError::format(
                        p,
                        format!(
                            "image is {w}x{h} but intrinsics say {}x{}",
                            intrinsics.width, intrinsics.height
                        ),
                    ));
                }
            }
            frames.push(FrameEntry {
                rgb,
                depth,
                timestamp: f.timestamp,
            });
        }
        frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

        Ok(Self {
            root,
            intrinsics_path,
            intrinsics,
            frames,
        })
    }
}

pub fn write_manifest(path: &Path, spec: &ManifestSpec) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(spec).expect("manifest serialize");
    std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e))
}
