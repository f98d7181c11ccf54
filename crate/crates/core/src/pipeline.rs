//! End-to-end orchestration shared by the CLI and the Python bindings:
//! configuration, dataset ingestion, and the track / fuse / eval / synth
//! entry points with their on-disk artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    aggregate_metrics, depth_metrics, DepthMetrics, EvalError, ScaleMode,
};
use crate::fusion::{fuse_views, FusionConfig, FusionError, FusionView};
use crate::imgproc::to_grayscale;
use crate::io::{
    self, load_depth_png, load_rgb_png, read_tum_trajectory, write_metrics_csv,
    write_metrics_json, write_ply, write_tum_trajectory, Intrinsics, IoError, MetricsReport,
    PerImageMetrics, SequenceManifest, TrajectoryEntry,
};
use crate::synth::{generate_frames, write_sequence, SceneSpec, SynthError, SyntheticScene};
use crate::tracking::{run_odometry, PseudoRgbdFrame, TrackError, TrackerConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Tracking(#[from] TrackError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Coarse category used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PipelineError::Config(_) => ErrorKind::Config,
            PipelineError::Tracking(TrackError::InvalidConfig(_))
            | PipelineError::Fusion(FusionError::InvalidConfig(_)) => ErrorKind::Config,
            _ => ErrorKind::Io,
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

/// Units for reported depth errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportUnits {
    Meters,
    #[default]
    Millimeters,
}

impl ReportUnits {
    fn factor(self) -> f64 {
        match self {
            ReportUnits::Meters => 1.0,
            ReportUnits::Millimeters => 1000.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ReportUnits::Meters => "m",
            ReportUnits::Millimeters => "mm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub scale_mode: Option<ScaleMode>,
    pub units: ReportUnits,
}

/// Full pipeline configuration as stored in a config JSON file. Unknown keys
/// are rejected by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.tracker
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        self.fusion
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("config serialize");
        std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e).into())
    }
}

/// Load every frame of a sequence into memory as grayscale + depth.
pub fn load_frames(manifest: &SequenceManifest) -> Result<Vec<PseudoRgbdFrame>, PipelineError> {
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        let rgb = load_rgb_png(&entry.rgb)?;
        let depth = load_depth_png(&entry.depth, manifest.intrinsics.depth_scale)?;
        frames.push(PseudoRgbdFrame {
            timestamp: entry.timestamp,
            intensity: to_grayscale(&rgb),
            depth,
        });
    }
    Ok(frames)
}

/// Keyframe index entry written next to the trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyframeRecord {
    pub frame_id: usize,
    pub timestamp: f64,
    /// World-from-camera pose as `tx ty tz qx qy qz qw`.
    pub pose: [f64; 7],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSummary {
    pub frames_tracked: usize,
    pub keyframe_count: usize,
    pub failure_frame: Option<usize>,
    pub total_seconds: f64,
    pub mean_frame_ms: f64,
}

/// Run odometry over a manifest and write `trajectory.txt`,
/// `keyframes.json`, `diagnostics.json`, `timing.json` and
/// `effective_config.json` into `out_dir`.
pub fn run_track(
    manifest_path: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<TrackSummary, PipelineError> {
    config.validate()?;
    let manifest = SequenceManifest::load(manifest_path)?;
    if manifest.frames.is_empty() {
        return Err(config_err("manifest lists no frames"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::file(out_dir, e))?;

    let frames = load_frames(&manifest)?;
    let camera = manifest
        .intrinsics
        .camera()
        .map_err(|e| config_err(e.to_string()))?;

    let start = Instant::now();
    let result = run_odometry(&frames, &camera, &config.tracker)?;
    let total_seconds = start.elapsed().as_secs_f64();

    let trajectory: Vec<TrajectoryEntry> = result
        .trajectory
        .iter()
        .map(|tp| TrajectoryEntry {
            timestamp: tp.timestamp,
            pose: tp.pose_world,
        })
        .collect();
    write_tum_trajectory(&out_dir.join("trajectory.txt"), &trajectory)?;

    let keyframes: Vec<KeyframeRecord> = result
        .keyframes
        .iter()
        .map(|kf| KeyframeRecord {
            frame_id: kf.id,
            timestamp: kf.timestamp,
            pose: io::tum::pose_to_tum(&kf.pose_world),
        })
        .collect();
    write_json(&out_dir.join("keyframes.json"), &keyframes)?;
    write_json(&out_dir.join("diagnostics.json"), &result.diagnostics)?;

    let tracked = result.trajectory.len();
    let mean_frame_ms = if tracked > 1 {
        total_seconds * 1000.0 / (tracked - 1) as f64
    } else {
        0.0
    };
    write_json(
        &out_dir.join("timing.json"),
        &serde_json::json!({
            "total_seconds": total_seconds,
            "mean_frame_ms": mean_frame_ms,
            "frames": tracked,
        }),
    )?;
    config.save(&out_dir.join("effective_config.json"))?;

    Ok(TrackSummary {
        frames_tracked: tracked,
        keyframe_count: result.keyframes.len(),
        failure_frame: result.failure_frame,
        total_seconds,
        mean_frame_ms,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("json serialize");
    std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e).into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuseSummary {
    pub views_integrated: usize,
    pub voxel_dims: [usize; 3],
    pub voxel_count: usize,
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub integrate_seconds: f64,
    pub total_seconds: f64,
}

/// Fuse the keyframes named in a keyframe index, with poses taken from the
/// trajectory file, and write the mesh as ASCII PLY.
pub fn run_fuse(
    manifest_path: &Path,
    keyframes_path: &Path,
    trajectory_path: &Path,
    config: &PipelineConfig,
    out_mesh: &Path,
) -> Result<FuseSummary, PipelineError> {
    config.validate()?;
    let manifest = SequenceManifest::load(manifest_path)?;
    let keyframes: Vec<KeyframeRecord> = read_json(keyframes_path)?;
    if keyframes.is_empty() {
        return Err(config_err("keyframe index is empty"));
    }
    let trajectory = read_tum_trajectory(trajectory_path)?;

    // Trajectory files quantize timestamps to microseconds; match within
    // half a quantum.
    const TIMESTAMP_TOL: f64 = 5e-5;
    let start = Instant::now();
    let mut views = Vec::with_capacity(keyframes.len());
    for record in &keyframes {
        let entry = manifest
            .frames
            .iter()
            .find(|f| (f.timestamp - record.timestamp).abs() < TIMESTAMP_TOL)
            .ok_or_else(|| {
                config_err(format!(
                    "keyframe at t={} not present in the manifest",
                    record.timestamp
                ))
            })?;
        // Pose source of truth is the trajectory; the index must be covered.
        let pose = trajectory
            .iter()
            .find(|t| (t.timestamp - record.timestamp).abs() < TIMESTAMP_TOL)
            .map(|t| t.pose)
            .ok_or_else(|| {
                config_err(format!(
                    "trajectory does not cover keyframe at t={}",
                    record.timestamp
                ))
            })?;
        let depth = load_depth_png(&entry.depth, manifest.intrinsics.depth_scale)?;
        let color = config
            .fusion
            .with_color
            .then(|| load_rgb_png(&entry.rgb))
            .transpose()?;
        views.push(FusionView {
            depth,
            color,
            camera: manifest
                .intrinsics
                .camera()
                .map_err(|e| config_err(e.to_string()))?,
            pose_world: pose,
        });
    }

    let (mesh, volume, stats) = fuse_views(&views, &config.fusion)?;
    write_ply(out_mesh, &mesh)?;
    if config.fusion.dump_volume {
        let stem = out_mesh.with_extension("volume");
        io::dump_volume(&stem, &volume)?;
    }
    let total_seconds = start.elapsed().as_secs_f64();

    let summary = FuseSummary {
        views_integrated: stats.views_integrated,
        voxel_dims: stats.dims,
        voxel_count: stats.voxel_count,
        vertex_count: mesh.vertices.len(),
        triangle_count: mesh.triangles.len(),
        integrate_seconds: stats.integrate_seconds,
        total_seconds,
    };
    if let Some(parent) = out_mesh.parent() {
        if parent.as_os_str().is_empty() {
            return Ok(summary);
        }
        write_json(&parent.join("fusion_report.json"), &summary)?;
    }
    Ok(summary)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        PipelineError::Io(IoError::Json {
            path: path.display().to_string(),
            source: e,
        })
    })
}

/// Collect the PNG files of a directory, sorted by file name.
fn png_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| IoError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    files.sort();
    Ok(files)
}

fn dir_depth_scale(dir: &Path, flag: Option<f64>) -> Result<f64, PipelineError> {
    if let Some(s) = flag {
        if !(s > 0.0) {
            return Err(config_err(format!("depth scale must be positive, got {s}")));
        }
        return Ok(s);
    }
    let intr = dir.join("intrinsics.json");
    if intr.is_file() {
        return Ok(Intrinsics::load(&intr)?.depth_scale);
    }
    Err(config_err(format!(
        "no depth scale for {}: pass one explicitly or provide {}/intrinsics.json",
        dir.display(),
        dir.display()
    )))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub images: usize,
    pub aggregate: DepthMetrics,
}

/// Evaluate predicted depth PNGs against ground-truth PNGs matched by file
/// name, writing JSON and CSV reports.
pub fn run_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    mode: ScaleMode,
    units: ReportUnits,
    pred_scale: Option<f64>,
    gt_scale: Option<f64>,
    out_json: &Path,
) -> Result<EvalSummary, PipelineError> {
    let pred_files = png_files(pred_dir)?;
    let gt_files = png_files(gt_dir)?;
    let names = |files: &[PathBuf]| -> Vec<String> {
        files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect()
    };
    let pred_names = names(&pred_files);
    let gt_names = names(&gt_files);
    if pred_names != gt_names {
        let unmatched: Vec<&String> = pred_names
            .iter()
            .filter(|n| !gt_names.contains(n))
            .chain(gt_names.iter().filter(|n| !pred_names.contains(n)))
            .collect();
        return Err(config_err(format!(
            "prediction and ground-truth directories do not match; unmatched files: {unmatched:?}"
        )));
    }
    if pred_files.is_empty() {
        return Err(config_err("no PNG files to evaluate"));
    }

    let pred_scale = dir_depth_scale(pred_dir, pred_scale)?;
    let gt_scale = dir_depth_scale(gt_dir, gt_scale)?;
    let to_units = units.factor();

    let mut per_image = Vec::with_capacity(pred_files.len());
    let mut records = Vec::with_capacity(pred_files.len());
    for (pred_path, gt_path) in pred_files.iter().zip(&gt_files) {
        let pred = load_depth_png(pred_path, pred_scale * to_units)?;
        let gt = load_depth_png(gt_path, gt_scale * to_units)?;
        let metrics = depth_metrics(&pred, &gt, mode)?;
        records.push(metrics);
        per_image.push(PerImageMetrics {
            name: pred_path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            metrics,
        });
    }
    let aggregate = aggregate_metrics(&records)?;
    let report = MetricsReport {
        scale_mode: mode,
        units: units.label().into(),
        per_image,
        aggregate,
    };
    write_metrics_json(out_json, &report)?;
    write_metrics_csv(&out_json.with_extension("csv"), &report)?;
    Ok(EvalSummary {
        images: records.len(),
        aggregate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub frames: usize,
    pub out_dir: PathBuf,
}

/// Generate a synthetic sequence from a scene description file.
pub fn run_synth(scene_path: &Path, out_dir: &Path, seed: u64) -> Result<SynthSummary, PipelineError> {
    let spec = SceneSpec::load(scene_path)?;
    let camera = spec
        .camera
        .camera()
        .map_err(|e| config_err(e.to_string()))?;
    let scene = SyntheticScene::new(spec.primitives.clone())?;
    let poses = spec.trajectory.poses()?;
    let seq = generate_frames(&scene, &camera, &poses, &spec.noise, spec.timestep, seed);
    write_sequence(out_dir, &spec.camera, &seq)?;
    Ok(SynthSummary {
        frames: seq.frames.len(),
        out_dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let cfg = PipelineConfig::default();
        cfg.save(&path).unwrap();
        let back = PipelineConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_config_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"tracker": {"gamma": 0.1, "bogus_knob": 3}}"#).unwrap();
        let err = PipelineConfig::load(&path).unwrap_err();
        assert!(matches!(err.kind(), ErrorKind::Config));
        assert!(err.to_string().contains("bogus_knob"));
    }

    #[test]
    fn invalid_config_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"tracker": {"gamma": -1.0}}"#).unwrap();
        assert!(PipelineConfig::load(&path).is_err());
        std::fs::write(&path, r#"{"fusion": {"voxel_size": 0.0}}"#).unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }
}
