use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::geom::Pose;

use super::IoError;

/// One trajectory sample: a timestamp and a world-from-camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Serialize a pose as the 7-tuple `tx ty tz qx qy qz qw`.
pub fn pose_to_tum(pose: &Pose) -> [f64; 7] {
    let t = pose.translation();
    let mut q = pose.unit_quaternion().into_inner();
    // Canonical sign keeps output deterministic across equivalent matrices.
    if q.w < 0.0 {
        q = -q;
    }
    [t.x, t.y, t.z, q.i, q.j, q.k, q.w]
}

pub fn pose_from_tum(v: &[f64; 7]) -> Result<Pose, String> {
    let q = Quaternion::new(v[6], v[3], v[4], v[5]);
    if q.norm() < 1e-9 {
        return Err("zero quaternion".into());
    }
    let rot = UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .into_inner();
    Pose::new(rot, Vector3::new(v[0], v[1], v[2])).map_err(|e| e.to_string())
}

/// Write a trajectory in TUM format: one `timestamp tx ty tz qx qy qz qw`
/// line per frame (quaternion w-last), world-from-camera.
pub fn write_tum_trajectory(path: &Path, entries: &[TrajectoryEntry]) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(entries.len() * 96);
    for e in entries {
        let [tx, ty, tz, qx, qy, qz, qw] = pose_to_tum(&e.pose);
        writeln!(
            out,
            "{:.6} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
            e.timestamp, tx, ty, tz, qx, qy, qz, qw
        )
        .expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| IoError::file(path, e))
}

/// Parse a TUM trajectory file. Lines starting with `#` and blank lines are
/// skipped.
pub fn read_tum_trajectory(path: &Path) -> Result<Vec<TrajectoryEntry>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::format(path, format!("line {}: {e}", lineno + 1)))?;
        if fields.len() != 8 {
            return Err(IoError::format(
                path,
                format!("line {}: expected 8 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let pose = pose_from_tum(&[
            fields[1], fields[2], fields[3], fields[4], fields[5], fields[6], fields[7],
        ])
        .map_err(|e| IoError::format(path, format!("line {}: {e}", lineno + 1)))?;
        entries.push(TrajectoryEntry {
            timestamp: fields[0],
            pose,
        });
    }
    Ok(entries)
}
