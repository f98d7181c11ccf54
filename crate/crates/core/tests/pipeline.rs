//! Whole-pipeline integration: synthetic sequences through tracking, fusion
//! and evaluation, in memory and through the on-disk formats.

use nalgebra::{Matrix3, Vector3};

use photovo_core::eval::ScaleMode;
use photovo_core::fusion::{extract_mesh, fuse_keyframes, FusionConfig};
use photovo_core::geom::{PinholeCamera, Pose};
use photovo_core::pipeline::{run_eval, run_fuse, run_synth, run_track, PipelineConfig, ReportUnits};
use photovo_core::synth::{render, Primitive, SceneSpec, SyntheticScene, Texture, TrajectorySpec};
use photovo_core::tracking::Keyframe;

fn plane_scene() -> SyntheticScene {
    SyntheticScene::new(vec![Primitive::Plane {
        point: [0.0, 0.0, 1.0],
        normal: [0.15, -0.1, -1.0],
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
    PinholeCamera::new(90.0, 90.0, 47.5, 35.5, 96, 72).unwrap()
}

/// RMS distance of points to their least-squares plane.
fn plane_fit_rms(points: &[Vector3<f64>]) -> f64 {
    let n = points.len() as f64;
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);
    let (mut min_idx, mut min_val) = (0, f64::INFINITY);
    for i in 0..3 {
        if eigen.eigenvalues[i] < min_val {
            min_val = eigen.eigenvalues[i];
            min_idx = i;
        }
    }
    let normal = eigen.eigenvectors.column(min_idx).into_owned();
    let sq: f64 = points
        .iter()
        .map(|p| {
            let d = normal.dot(&(p - centroid));
            d * d
        })
        .sum();
    (sq / n).sqrt()
}

#[test]
fn single_plane_keyframe_fuses_to_a_plane() {
    let cam = camera();
    let (img, depth) = render(&plane_scene(), &cam, &Pose::identity());
    let kf = Keyframe::new(0, 0.0, img, depth, cam, 2, Pose::identity()).unwrap();
    let cfg = FusionConfig {
        voxel_size: 0.02,
        ..FusionConfig::default()
    };
    let (mesh, _, _) = fuse_keyframes(&[kf], &cfg).unwrap();
    assert!(mesh.vertices.len() > 200);
    let rms = plane_fit_rms(&mesh.vertices);
    assert!(rms < cfg.voxel_size / 2.0, "plane-fit RMS {rms}");
}

#[test]
fn repeated_keyframe_yields_the_same_mesh() {
    let cam = camera();
    let (img, depth) = render(&plane_scene(), &cam, &Pose::identity());
    let make_kf =
        || Keyframe::new(0, 0.0, img.clone(), depth.clone(), cam, 2, Pose::identity()).unwrap();
    let cfg = FusionConfig {
        voxel_size: 0.02,
        ..FusionConfig::default()
    };
    let (mesh_once, vol_once, _) = fuse_keyframes(&[make_kf()], &cfg).unwrap();
    let five: Vec<Keyframe> = (0..5).map(|_| make_kf()).collect();
    let (mesh_five, vol_five, _) = fuse_keyframes(&five, &cfg).unwrap();
    // Averaging identical observations leaves the distances unchanged, so
    // the extracted mesh is identical; only the weights grow.
    assert_eq!(mesh_once.vertices.len(), mesh_five.vertices.len());
    assert_eq!(mesh_once.triangles, mesh_five.triangles);
    for (a, b) in mesh_once.vertices.iter().zip(&mesh_five.vertices) {
        assert!((a - b).norm() < 1e-9);
    }
    for (idx, (w1, w5)) in vol_once.weight().iter().zip(vol_five.weight()).enumerate() {
        if *w1 > 0.0 {
            assert_eq!(*w5, 5.0 * w1, "voxel {idx}");
        }
    }
}

#[test]
fn color_fusion_carries_vertex_colors() {
    let cam = camera();
    let scene = plane_scene();
    let (img, depth) = render(&scene, &cam, &Pose::identity());
    let mut rgb = photovo_core::imgproc::ColorImage::new(cam.width, cam.height);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let g = img.get(u, v);
            rgb.set(u, v, [g, 0.5 * g, 1.0 - g]);
        }
    }
    let mut volume = photovo_core::fusion::TsdfVolume::new(
        Vector3::new(-0.6, -0.5, 0.7),
        0.02,
        [60, 50, 30],
        0.08,
        true,
        u64::MAX,
    )
    .unwrap();
    volume
        .integrate(&depth, Some(&rgb), &cam, &Pose::identity())
        .unwrap();
    let mesh = extract_mesh(&volume);
    let colors = mesh.colors.as_ref().expect("colored mesh");
    assert_eq!(colors.len(), mesh.vertices.len());
    assert!(colors.iter().any(|c| c[2] > 0.1));
}

fn write_test_scene(path: &std::path::Path) {
    let spec = SceneSpec {
        camera: photovo_core::io::Intrinsics {
            fx: 80.0,
            fy: 80.0,
            cx: 39.5,
            cy: 29.5,
            width: 80,
            height: 60,
            depth_scale: 1e-4,
        },
        primitives: vec![Primitive::Plane {
            point: [0.0, 0.0, 1.0],
            normal: [0.1, 0.0, -1.0],
            texture: Texture {
                offset: 0.5,
                amplitude: 0.4,
                freq_a: [6.0, 2.0, 0.5],
                freq_b: [-3.0, 5.0, 0.2],
                phase_a: 0.4,
                phase_b: 1.3,
            },
        }],
        trajectory: TrajectorySpec::Orbit {
            frames: 8,
            angle_step_deg: 2.0,
            axis: [0.1, 0.1, 0.99],
            translation_step: [0.012, 0.0, 0.0],
        },
        noise: Default::default(),
        timestep: 1.0 / 30.0,
    };
    spec.save(path).unwrap();
}

#[test]
fn file_level_track_fuse_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("scene.json");
    write_test_scene(&scene_path);
    let seq = dir.path().join("seq");
    let synth = run_synth(&scene_path, &seq, 5).unwrap();
    assert_eq!(synth.frames, 8);

    let config = PipelineConfig::default();
    let run = dir.path().join("run");
    let summary = run_track(&seq.join("manifest.json"), &config, &run).unwrap();
    assert_eq!(summary.frames_tracked, 8);
    assert!(summary.failure_frame.is_none());
    for file in [
        "trajectory.txt",
        "keyframes.json",
        "diagnostics.json",
        "timing.json",
        "effective_config.json",
    ] {
        assert!(run.join(file).is_file(), "missing {file}");
    }
    // The effective config reloads to an identical pipeline.
    let reloaded = PipelineConfig::load(&run.join("effective_config.json")).unwrap();
    assert_eq!(reloaded, config);

    let mesh_path = run.join("mesh.ply");
    let fuse = run_fuse(
        &seq.join("manifest.json"),
        &run.join("keyframes.json"),
        &run.join("trajectory.txt"),
        &config,
        &mesh_path,
    )
    .unwrap();
    assert!(fuse.triangle_count > 0);
    assert!(mesh_path.is_file());

    let report = run.join("depth_report.json");
    let eval = run_eval(
        &seq.join("depth"),
        &seq.join("depth"),
        ScaleMode::MedianRatio,
        ReportUnits::Millimeters,
        Some(1e-4),
        Some(1e-4),
        &report,
    )
    .unwrap();
    assert_eq!(eval.images, 8);
    assert_eq!(eval.aggregate.abs_rel, 0.0);
    assert_eq!(eval.aggregate.delta1, 1.0);
    assert!(report.with_extension("csv").is_file());
}

#[test]
fn depth_noise_degrades_tracking() {
    // Median ATE over 10 seeds with 1% relative depth noise must strictly
    // exceed the noise-free run's error.
    use photovo_core::eval::absolute_trajectory_error;
    use photovo_core::synth::{generate_frames, NoiseParams};
    use photovo_core::tracking::{run_odometry, TrackerConfig};

    let cam = camera();
    let poses = TrajectorySpec::Orbit {
        frames: 10,
        angle_step_deg: 2.0,
        axis: [0.1, 0.1, 0.99],
        translation_step: [0.012, 0.0, 0.0],
    }
    .poses()
    .unwrap();
    let cfg = TrackerConfig {
        pyramid_levels: 3,
        min_valid_pixels: 500,
        ..TrackerConfig::default()
    };
    let gt: Vec<_> = poses.iter().map(|p| *p.translation()).collect();
    let ate_for = |noise: &NoiseParams, seed: u64| -> f64 {
        let seq = generate_frames(&plane_scene(), &cam, &poses, noise, 1.0 / 30.0, seed);
        let result = run_odometry(&seq.frames, &cam, &cfg).unwrap();
        assert!(result.failure_frame.is_none());
        let est: Vec<_> = result
            .trajectory
            .iter()
            .map(|t| *t.pose_world.translation())
            .collect();
        absolute_trajectory_error(&gt, &est).unwrap().rmse
    };

    let clean = ate_for(&NoiseParams::default(), 0);
    let mut noisy: Vec<f64> = (1..=10)
        .map(|seed| {
            ate_for(
                &NoiseParams {
                    depth_rel_sigma: 0.01,
                    intensity_sigma: 0.0,
                },
                seed,
            )
        })
        .collect();
    noisy.sort_by(f64::total_cmp);
    let median = noisy[4];
    assert!(
        median > clean,
        "noisy median ATE {median} should exceed clean ATE {clean}"
    );
}

#[test]
fn volume_dump_is_written_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("scene.json");
    write_test_scene(&scene_path);
    let seq = dir.path().join("seq");
    run_synth(&scene_path, &seq, 5).unwrap();
    let config = PipelineConfig::default();
    let run = dir.path().join("run");
    run_track(&seq.join("manifest.json"), &config, &run).unwrap();

    let mut config = PipelineConfig::default();
    config.fusion.dump_volume = true;
    let mesh_path = run.join("mesh.ply");
    run_fuse(
        &seq.join("manifest.json"),
        &run.join("keyframes.json"),
        &run.join("trajectory.txt"),
        &config,
        &mesh_path,
    )
    .unwrap();
    for ext in ["json", "tsdf", "weight"] {
        assert!(
            run.join(format!("mesh.volume.{ext}")).is_file(),
            "missing volume dump .{ext}"
        );
    }
}
