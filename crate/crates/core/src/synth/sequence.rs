use std::path::Path;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Pose;
use crate::imgproc::{ColorImage, DepthImage, Image};
use crate::io::{
    self, write_manifest, FrameSpec, Intrinsics, ManifestSpec, TrajectoryEntry,
};
use crate::tracking::PseudoRgbdFrame;

use super::{render, Primitive, SynthError, SyntheticScene};

/// Per-frame observation noise, applied after rendering so ground truth
/// stays exact. Depth noise is relative (sigma = depth_rel_sigma * depth);
/// intensity noise is absolute and clamped back to [0, 1].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub depth_rel_sigma: f64,
    pub intensity_sigma: f64,
}

/// Camera trajectory generator. `Orbit` composes a constant relative motion
/// (a rotation step about `axis` plus a translation step, both expressed in
/// the previous camera frame); `Line` is pure translation; `Poses` lists
/// explicit world-from-camera poses as `tx ty tz qx qy qz qw`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Orbit {
        frames: usize,
        angle_step_deg: f64,
        axis: [f64; 3],
        translation_step: [f64; 3],
    },
    Line {
        frames: usize,
        step: [f64; 3],
    },
    Poses {
        poses: Vec<[f64; 7]>,
    },
}

impl TrajectorySpec {
    pub fn poses(&self) -> Result<Vec<Pose>, SynthError> {
        match self {
            TrajectorySpec::Orbit {
                frames,
                angle_step_deg,
                axis,
                translation_step,
            } => {
                if *frames == 0 {
                    return Err(SynthError::InvalidScene("trajectory has no frames".into()));
                }
                let axis = Vector3::from(*axis);
                if axis.norm() < 1e-12 {
                    return Err(SynthError::InvalidScene("orbit axis is zero".into()));
                }
                let step = Pose::from_axis_angle(
                    &axis,
                    angle_step_deg.to_radians(),
                    Vector3::from(*translation_step),
                );
                let mut poses = Vec::with_capacity(*frames);
                poses.push(Pose::identity());
                for _ in 1..*frames {
                    poses.push(poses.last().unwrap().compose(&step));
                }
                Ok(poses)
            }
            TrajectorySpec::Line { frames, step } => {
                if *frames == 0 {
                    return Err(SynthError::InvalidScene("trajectory has no frames".into()));
                }
                let step = Pose::new(nalgebra::Matrix3::identity(), Vector3::from(*step))
                    .expect("identity rotation");
                let mut poses = Vec::with_capacity(*frames);
                poses.push(Pose::identity());
                for _ in 1..*frames {
                    poses.push(poses.last().unwrap().compose(&step));
                }
                Ok(poses)
            }
            TrajectorySpec::Poses { poses } => {
                if poses.is_empty() {
                    return Err(SynthError::InvalidScene("trajectory has no frames".into()));
                }
                poses
                    .iter()
                    .map(|p| {
                        io::tum::pose_from_tum(p)
                            .map_err(|e| SynthError::InvalidScene(format!("bad pose: {e}")))
                    })
                    .collect()
            }
        }
    }
}

/// Complete scene description as stored in a scene JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub camera: Intrinsics,
    pub primitives: Vec<Primitive>,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
}

fn default_timestep() -> f64 {
    1.0 / 30.0
}

impl SceneSpec {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Io(io::IoError::file(path, e)))?;
        let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| {
            SynthError::Io(io::IoError::Json {
                path: path.display().to_string(),
                source: e,
            })
        })?;
        SyntheticScene::new(spec.primitives.clone())?;
        spec.camera
            .camera()
            .map_err(|e| SynthError::InvalidScene(e.to_string()))?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = serde_json::to_string_pretty(self).expect("scene serialize");
        std::fs::write(path, text + "\n").map_err(|e| SynthError::Io(io::IoError::file(path, e)))
    }
}

/// Frames plus exact ground-truth world-from-camera poses.
#[derive(Debug, Clone)]
pub struct GeneratedSequence {
    pub frames: Vec<PseudoRgbdFrame>,
    pub poses: Vec<Pose>,
    pub timestep: f64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1] avoids log(0).
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Render every pose and optionally corrupt the observations. Deterministic
/// for a fixed seed.
pub fn generate_frames(
    scene: &SyntheticScene,
    cam: &crate::geom::PinholeCamera,
    poses: &[Pose],
    noise: &NoiseParams,
    timestep: f64,
    seed: u64,
) -> GeneratedSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let (mut intensity, mut depth) = render(scene, cam, pose);
        if noise.intensity_sigma > 0.0 {
            let data: Vec<f64> = intensity
                .data()
                .iter()
                .map(|x| (x + noise.intensity_sigma * gaussian(&mut rng)).clamp(0.0, 1.0))
                .collect();
            intensity = Image::from_data(cam.width, cam.height, data).expect("clamped data");
        }
        if noise.depth_rel_sigma > 0.0 {
            let data: Vec<f64> = depth
                .data()
                .iter()
                .map(|d| {
                    if *d > 0.0 {
                        (d * (1.0 + noise.depth_rel_sigma * gaussian(&mut rng))).max(1e-6)
                    } else {
                        *d
                    }
                })
                .collect();
            depth = DepthImage::from_data(cam.width, cam.height, data).expect("finite data");
        }
        frames.push(PseudoRgbdFrame {
            timestamp: i as f64 * timestep,
            intensity,
            depth,
        });
    }
    GeneratedSequence {
        frames,
        poses: poses.to_vec(),
        timestep,
    }
}

/// Write a generated sequence in the pipeline's on-disk layout:
/// `frames/NNNNNN.png` (8-bit RGB), `depth/NNNNNN.png` (16-bit),
/// `intrinsics.json`, `groundtruth.txt` (TUM) and `manifest.json`.
pub fn write_sequence(
    out_dir: &Path,
    intrinsics: &Intrinsics,
    seq: &GeneratedSequence,
) -> Result<(), SynthError> {
    let frames_dir = out_dir.join("frames");
    let depth_dir = out_dir.join("depth");
    for d in [out_dir, &frames_dir, &depth_dir] {
        std::fs::create_dir_all(d).map_err(|e| SynthError::Io(io::IoError::file(d, e)))?;
    }
    intrinsics.save(&out_dir.join("intrinsics.json"))?;

    let mut manifest_frames = Vec::with_capacity(seq.frames.len());
    for (i, frame) in seq.frames.iter().enumerate() {
        let rgb_rel = format!("frames/{i:06}.png");
        let depth_rel = format!("depth/{i:06}.png");
        let mut rgb = ColorImage::new(frame.intensity.width(), frame.intensity.height());
        for v in 0..frame.intensity.height() {
            for u in 0..frame.intensity.width() {
                let g = frame.intensity.get(u, v);
                rgb.set(u, v, [g, g, g]);
            }
        }
        io::save_rgb_png(&out_dir.join(&rgb_rel), &rgb)?;
        io::save_depth_png(&out_dir.join(&depth_rel), &frame.depth, intrinsics.depth_scale)?;
        manifest_frames.push(FrameSpec {
            rgb: rgb_rel,
            depth: depth_rel,
            timestamp: frame.timestamp,
        });
    }

    let gt: Vec<TrajectoryEntry> = seq
        .frames
        .iter()
        .zip(&seq.poses)
        .map(|(f, p)| TrajectoryEntry {
            timestamp: f.timestamp,
            pose: *p,
        })
        .collect();
    io::write_tum_trajectory(&out_dir.join("groundtruth.txt"), &gt)?;
    write_manifest(
        &out_dir.join("manifest.json"),
        &ManifestSpec {
            intrinsics: "intrinsics.json".into(),
            frames: manifest_frames,
        },
    )?;
    Ok(())
}
