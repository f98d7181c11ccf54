use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fusion::TsdfVolume;

use super::IoError;

#[derive(Debug, Serialize, Deserialize)]
struct VolumeHeader {
    origin: [f64; 3],
    voxel_size: f64,
    dims: [usize; 3],
    trunc: f64,
}

fn with_suffix(stem: &Path, ext: &str) -> std::path::PathBuf {
    let name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.with_file_name(format!("{name}.{ext}"))
}

/// Debug dump of a TSDF volume: `<stem>.json` header plus raw little-endian
/// float32 `<stem>.tsdf` and `<stem>.weight` arrays in x-fastest order.
pub fn dump_volume(stem: &Path, vol: &TsdfVolume) -> Result<(), IoError> {
    let header = VolumeHeader {
        origin: [vol.origin().x, vol.origin().y, vol.origin().z],
        voxel_size: vol.voxel_size(),
        dims: vol.dims(),
        trunc: vol.truncation(),
    };
    let json_path = with_suffix(stem, "json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&header).expect("header serialize") + "\n",
    )
    .map_err(|e| IoError::file(&json_path, e))?;

    for (ext, data) in [("tsdf", vol.tsdf()), ("weight", vol.weight())] {
        let path = with_suffix(stem, ext);
        let mut bytes = Vec::with_capacity(data.len() * 4);
        for v in data {
            bytes
                .write_all(&(*v as f32).to_le_bytes())
                .expect("write to vec");
        }
        std::fs::write(&path, bytes).map_err(|e| IoError::file(&path, e))?;
    }
    Ok(())
}
