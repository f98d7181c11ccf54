use serde::{Deserialize, Serialize};

use crate::geom::{PinholeCamera, Pose};
use crate::imgproc::{DepthImage, Image, ImagePyramid};

use super::{track_frame, Keyframe, TrackError, TrackerConfig};

/// One input frame: grayscale intensity plus a dense depth map.
#[derive(Debug, Clone)]
pub struct PseudoRgbdFrame {
    pub timestamp: f64,
    pub intensity: Image,
    pub depth: DepthImage,
}

/// One estimated trajectory sample (world-from-camera).
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub frame_id: usize,
    pub timestamp: f64,
    pub pose_world: Pose,
}

/// Per-frame tracking diagnostics, serialized to the diagnostics JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub frame_id: usize,
    pub timestamp: f64,
    pub keyframe_id: usize,
    pub overlap_ratio: f64,
    pub final_cost: f64,
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub promoted_keyframe: bool,
}

#[derive(Debug)]
pub struct OdometryResult {
    pub trajectory: Vec<TrajectoryPoint>,
    pub keyframes: Vec<Keyframe>,
    /// Index of the frame at which tracking failed (the third consecutive
    /// non-converged frame), if it did.
    pub failure_frame: Option<usize>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

/// Consecutive non-converged frames that count as tracking failure. A single
/// blip should not terminate a run.
const FAILURE_STREAK: usize = 3;

/// Frame-to-keyframe odometry over a full sequence.
///
/// Frame 0 becomes the first keyframe at the world origin. Every subsequent
/// frame is tracked against the current keyframe under a constant-motion
/// initialization: the previous relative pose advanced by the last
/// inter-frame velocity, which survives keyframe switches. When the overlap
/// ratio of a converged track drops below `keyframe_ratio`, the frame is
/// promoted to a new keyframe. Three consecutive non-converged frames
/// terminate the run with `failure_frame` set.
pub fn run_odometry(
    frames: &[PseudoRgbdFrame],
    camera: &PinholeCamera,
    cfg: &TrackerConfig,
) -> Result<OdometryResult, TrackError> {
    cfg.validate()?;
    let Some(first) = frames.first() else {
        return Err(TrackError::InitializationFailed);
    };
    if first.depth.valid_count() == 0 {
        return Err(TrackError::InitializationFailed);
    }

    let mut keyframes = vec![Keyframe::new(
        0,
        first.timestamp,
        first.intensity.clone(),
        first.depth.clone(),
        *camera,
        cfg.pyramid_levels,
        Pose::identity(),
    )?];
    let mut trajectory = vec![TrajectoryPoint {
        frame_id: 0,
        timestamp: first.timestamp,
        pose_world: Pose::identity(),
    }];
    let mut diagnostics = vec![FrameDiagnostics {
        frame_id: 0,
        timestamp: first.timestamp,
        keyframe_id: 0,
        overlap_ratio: 1.0,
        final_cost: 0.0,
        iterations: Vec::new(),
        converged: true,
        promoted_keyframe: true,
    }];

    // Relative pose of the previous frame against the current keyframe, and
    // the last inter-frame motion (current-from-previous camera).
    let mut last_pose_ck = Pose::identity();
    let mut velocity = Pose::identity();
    let mut last_pose_world = Pose::identity();
    let mut failure_frame = None;
    let mut streak = 0usize;

    for (frame_id, frame) in frames.iter().enumerate().skip(1) {
        let kf = keyframes.last().expect("at least the initial keyframe");
        let pyramid = ImagePyramid::build(
            frame.intensity.clone(),
            None,
            *camera,
            cfg.pyramid_levels,
        )?;

        // Constant-motion initialization: advance the previous relative pose
        // by the last inter-frame velocity.
        let init = velocity.compose(&last_pose_ck);

        // Per-frame geometric degeneracy counts as a non-converged frame so
        // the failure predicate can fire; setup-level errors still abort.
        let result = match track_frame(kf, &pyramid, &init, cfg) {
            Ok(r) => Some(r),
            Err(TrackError::DegenerateGeometry(_)) => None,
            Err(other) => return Err(other),
        };

        let (pose_ck, overlap, cost, iterations, converged) = match &result {
            Some(r) => (
                r.pose_ck,
                r.overlap_ratio,
                r.final_cost,
                r.iterations_per_level.clone(),
                r.converged,
            ),
            None => (init, 0.0, f64::INFINITY, Vec::new(), false),
        };

        let pose_world = kf.pose_world.compose(&pose_ck.inverse());
        trajectory.push(TrajectoryPoint {
            frame_id,
            timestamp: frame.timestamp,
            pose_world,
        });

        streak = if converged { 0 } else { streak + 1 };

        // Velocity survives keyframe switches; only update it from converged
        // estimates so one bad frame does not poison the next init.
        if converged {
            velocity = pose_world.inverse().compose(&last_pose_world);
        }
        last_pose_world = pose_world;

        // Promote converged low-overlap frames (with usable depth) to a new
        // keyframe anchored at the tracked world pose.
        let mut promoted = false;
        if converged && overlap < cfg.keyframe_ratio && frame.depth.valid_count() > 0 {
            keyframes.push(Keyframe::new(
                frame_id,
                frame.timestamp,
                frame.intensity.clone(),
                frame.depth.clone(),
                *camera,
                cfg.pyramid_levels,
                pose_world,
            )?);
            last_pose_ck = Pose::identity();
            promoted = true;
        } else {
            last_pose_ck = pose_ck;
        }

        diagnostics.push(FrameDiagnostics {
            frame_id,
            timestamp: frame.timestamp,
            keyframe_id: if promoted {
                frame_id
            } else {
                keyframes.last().expect("nonempty").id
            },
            overlap_ratio: overlap,
            final_cost: cost,
            iterations,
            converged,
            promoted_keyframe: promoted,
        });

        if streak >= FAILURE_STREAK {
            failure_frame = Some(frame_id);
            break;
        }
    }

    Ok(OdometryResult {
        trajectory,
        keyframes,
        failure_frame,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Twist;
    use crate::synth::{
        generate_frames, NoiseParams, Primitive, SyntheticScene, Texture, TrajectorySpec,
    };
    use nalgebra::Vector3;

    fn scene() -> SyntheticScene {
        SyntheticScene::new(vec![Primitive::Plane {
            point: [0.0, 0.0, 1.0],
            normal: [0.0, 0.0, -1.0],
            texture: Texture {
                offset: 0.5,
                amplitude: 0.4,
                freq_a: [6.0, 2.0, 0.5],
                freq_b: [-3.0, 5.0, 0.2],
                phase_a: 0.4,
                phase_b: 1.3,
            },
        }])
        .unwrap()
    }

    fn camera() -> PinholeCamera {
        PinholeCamera::new(100.0, 100.0, 63.5, 47.5, 128, 96).unwrap()
    }

    fn config() -> TrackerConfig {
        TrackerConfig {
            pyramid_levels: 3,
            min_valid_pixels: 500,
            ..TrackerConfig::default()
        }
    }

    fn orbit(frames: usize) -> Vec<Pose> {
        TrajectorySpec::Orbit {
            frames,
            angle_step_deg: 1.0,
            axis: [0.0, 1.0, 0.0],
            translation_step: [0.005, 0.0, 0.0],
        }
        .poses()
        .unwrap()
    }

    #[test]
    fn single_frame_sequence() {
        let cam = camera();
        let seq = generate_frames(
            &scene(),
            &cam,
            &[Pose::identity()],
            &NoiseParams::default(),
            1.0 / 30.0,
            0,
        );
        let result = run_odometry(&seq.frames, &cam, &config()).unwrap();
        assert_eq!(result.trajectory.len(), 1);
        assert_eq!(result.keyframes.len(), 1);
        assert!(result.failure_frame.is_none());
        assert!(
            (result.trajectory[0].pose_world.matrix() - Pose::identity().matrix()).norm() < 1e-12
        );
    }

    #[test]
    fn tracks_noise_free_orbit_accurately() {
        let cam = camera();
        let poses = orbit(12);
        let seq = generate_frames(&scene(), &cam, &poses, &NoiseParams::default(), 1.0 / 30.0, 0);
        let result = run_odometry(&seq.frames, &cam, &config()).unwrap();
        assert!(result.failure_frame.is_none());
        assert_eq!(result.trajectory.len(), 12);
        // Per-frame relative motion error against the exact trajectory.
        for w in result.trajectory.windows(2) {
            let est_rel = w[0].pose_world.inverse().compose(&w[1].pose_world);
            let gt_rel = poses[w[0].frame_id]
                .inverse()
                .compose(&poses[w[1].frame_id]);
            let err = gt_rel.inverse().compose(&est_rel);
            let (twist, _) = err.log();
            assert!(
                twist.omega.norm().to_degrees() < 0.1,
                "frame {}: relative rotation error {} deg",
                w[1].frame_id,
                twist.omega.norm().to_degrees()
            );
            assert!(
                err.translation().norm() < 0.005,
                "frame {}: relative translation error {} m",
                w[1].frame_id,
                err.translation().norm()
            );
        }
        // Accumulated drift over the short run stays well below path length.
        let gt_pos: Vec<_> = poses.iter().map(|p| *p.translation()).collect();
        let est_pos: Vec<_> = result
            .trajectory
            .iter()
            .map(|t| *t.pose_world.translation())
            .collect();
        let ate = crate::eval::absolute_trajectory_error(&gt_pos, &est_pos).unwrap();
        let path_len: f64 = gt_pos.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        assert!(
            ate.rmse < 0.01 * path_len,
            "ATE {} vs path {}",
            ate.rmse,
            path_len
        );
    }

    #[test]
    fn first_frame_without_depth_fails_initialization() {
        let cam = camera();
        let mut seq = generate_frames(
            &scene(),
            &cam,
            &[Pose::identity()],
            &NoiseParams::default(),
            1.0 / 30.0,
            0,
        );
        seq.frames[0].depth = DepthImage::invalid(cam.width, cam.height);
        assert!(matches!(
            run_odometry(&seq.frames, &cam, &config()),
            Err(TrackError::InitializationFailed)
        ));
        assert!(matches!(
            run_odometry(&[], &cam, &config()),
            Err(TrackError::InitializationFailed)
        ));
    }

    #[test]
    fn noise_injected_depth_fails_within_three_frames() {
        // A slanted plane makes translation parallax depth-dependent, so a
        // keyframe with corrupted depth cannot photometrically explain the
        // true motion and tracking against it must stall at the saturation
        // ceiling.
        let cam = camera();
        let scene = SyntheticScene::new(vec![Primitive::Plane {
            point: [0.0, 0.0, 1.0],
            normal: [0.45, 0.2, -1.0],
            texture: Texture {
                offset: 0.5,
                amplitude: 0.4,
                freq_a: [20.0, 9.0, 0.5],
                freq_b: [-8.0, 16.0, 0.2],
                phase_a: 0.4,
                phase_b: 1.3,
            },
        }])
        .unwrap();
        let poses = TrajectorySpec::Orbit {
            frames: 16,
            angle_step_deg: 1.0,
            axis: [0.0, 1.0, 0.0],
            translation_step: [0.02, 0.0, 0.0],
        }
        .poses()
        .unwrap();
        let mut seq = generate_frames(&scene, &cam, &poses, &NoiseParams::default(), 1.0 / 30.0, 0);
        let inject_at = 8;
        for frame in seq.frames.iter_mut().skip(inject_at) {
            let junk: Vec<f64> = (0..cam.width * cam.height)
                .map(|i| {
                    let x = (i as u64)
                        .wrapping_mul(0x9e3779b97f4a7c15)
                        .wrapping_add(11);
                    0.02 + ((x >> 32) % 1000) as f64 / 10000.0
                })
                .collect();
            frame.depth = DepthImage::from_data(cam.width, cam.height, junk).unwrap();
        }
        // Keyframe every frame so the corrupted depth enters the reference
        // quickly.
        let cfg = TrackerConfig {
            keyframe_ratio: 1.0,
            convergence_eps: 1e-6,
            ..config()
        };
        let result = run_odometry(&seq.frames, &cam, &cfg).unwrap();
        let failure = result.failure_frame.expect("tracking must fail");
        assert!(
            (inject_at..=inject_at + 3).contains(&failure),
            "failure at {failure}, injected at {inject_at}"
        );

        // The same sequence without injection completes.
        let clean = generate_frames(&scene, &cam, &poses, &NoiseParams::default(), 1.0 / 30.0, 0);
        let result = run_odometry(&clean.frames, &cam, &cfg).unwrap();
        assert!(result.failure_frame.is_none());
        assert_eq!(result.trajectory.len(), 16);
    }

    #[test]
    fn keyframe_promotion_resets_reference() {
        let cam = camera();
        // Large-ish steps so overlap decays quickly.
        let poses = TrajectorySpec::Orbit {
            frames: 10,
            angle_step_deg: 3.0,
            axis: [0.0, 1.0, 0.0],
            translation_step: [0.01, 0.0, 0.0],
        }
        .poses()
        .unwrap();
        let seq = generate_frames(&scene(), &cam, &poses, &NoiseParams::default(), 1.0 / 30.0, 0);
        let cfg = TrackerConfig {
            keyframe_ratio: 0.9,
            ..config()
        };
        let result = run_odometry(&seq.frames, &cam, &cfg).unwrap();
        assert!(result.keyframes.len() > 1, "expected keyframe churn");
        assert!(result.failure_frame.is_none());
        // Keyframe world poses must match the trajectory at their frames.
        for kf in &result.keyframes {
            let tp = &result.trajectory[kf.id];
            assert!((kf.pose_world.matrix() - tp.pose_world.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn identical_inputs_give_bitwise_identical_trajectories() {
        let cam = camera();
        let poses = orbit(8);
        let noise = NoiseParams {
            depth_rel_sigma: 0.004,
            intensity_sigma: 0.004,
        };
        let seq = generate_frames(&scene(), &cam, &poses, &noise, 1.0 / 30.0, 5);
        let a = run_odometry(&seq.frames, &cam, &config()).unwrap();
        let b = run_odometry(&seq.frames, &cam, &config()).unwrap();
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (ta, tb) in a.trajectory.iter().zip(&b.trajectory) {
            assert_eq!(ta.pose_world.matrix(), tb.pose_world.matrix());
        }
        assert_eq!(a.failure_frame, b.failure_frame);
        assert_eq!(
            a.keyframes.iter().map(|k| k.id).collect::<Vec<_>>(),
            b.keyframes.iter().map(|k| k.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn warp_consistency_forward_backward() {
        let cam = camera();
        let true_ck = Twist::new(
            Vector3::new(0.0, 1.5f64.to_radians(), 0.0),
            Vector3::new(0.004, 0.0, 0.0),
        )
        .exp();
        let scene = scene();
        let seq_a = generate_frames(
            &scene,
            &cam,
            &[Pose::identity()],
            &NoiseParams::default(),
            1.0 / 30.0,
            0,
        );
        let seq_b = generate_frames(
            &scene,
            &cam,
            &[true_ck.inverse()],
            &NoiseParams::default(),
            1.0 / 30.0,
            0,
        );
        let cfg = config();
        let kf_a = Keyframe::new(
            0,
            0.0,
            seq_a.frames[0].intensity.clone(),
            seq_a.frames[0].depth.clone(),
            cam,
            cfg.pyramid_levels,
            Pose::identity(),
        )
        .unwrap();
        let kf_b = Keyframe::new(
            0,
            0.0,
            seq_b.frames[0].intensity.clone(),
            seq_b.frames[0].depth.clone(),
            cam,
            cfg.pyramid_levels,
            Pose::identity(),
        )
        .unwrap();
        let pyr_a = ImagePyramid::build(
            seq_a.frames[0].intensity.clone(),
            None,
            cam,
            cfg.pyramid_levels,
        )
        .unwrap();
        let pyr_b = ImagePyramid::build(
            seq_b.frames[0].intensity.clone(),
            None,
            cam,
            cfg.pyramid_levels,
        )
        .unwrap();
        let ab = track_frame(&kf_a, &pyr_b, &Pose::identity(), &cfg).unwrap();
        let ba = track_frame(&kf_b, &pyr_a, &Pose::identity(), &cfg).unwrap();
        let roundtrip = ab.pose_ck.compose(&ba.pose_ck);
        let (twist, _) = roundtrip.log();
        assert!(
            twist.omega.norm().to_degrees() < 0.05,
            "rotation residue {} deg",
            twist.omega.norm().to_degrees()
        );
        assert!(
            roundtrip.translation().norm() < 0.001,
            "translation residue {} m",
            roundtrip.translation().norm()
        );
    }

    #[test]
    fn overlap_non_increasing_under_growing_translation() {
        let cam = camera();
        let (img, depth) = crate::synth::render(&scene(), &cam, &Pose::identity());
        let kf = Keyframe::new(0, 0.0, img, depth, cam, 3, Pose::identity()).unwrap();
        let frame = kf.pyramid.level(0).intensity.clone();
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let shift = 0.02 * i as f64;
            let pose = Pose::new(nalgebra::Matrix3::identity(), Vector3::new(shift, 0.0, 0.0))
                .unwrap();
            let eval = crate::tracking::photometric_cost(&kf, &frame, &pose, 0, 0.1).unwrap();
            let overlap = eval.overlap_ratio();
            assert!(overlap <= last + 1e-12, "overlap grew at step {i}");
            last = overlap;
        }
    }
}
