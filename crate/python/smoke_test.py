#!/usr/bin/env python3
"""Smoke test for the photovo_py extension module.

Builds nothing itself: compile the module first with

    cargo build -p photovo-py --release

then run

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / "release" / "libphotovo_py.so",
        REPO / "target" / "debug" / "libphotovo_py.so",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p photovo-py --release")
    stage = Path(tempfile.mkdtemp(prefix="photovo_py_"))
    shutil.copy(built, stage / "photovo_py.so")
    sys.path.insert(0, str(stage))
    import photovo_py

    return photovo_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    pv = import_module()

    # Camera projection round trip.
    cam = pv.PinholeCamera(100.0, 100.0, 50.0, 50.0, 200, 200)
    u, v = cam.project((1.0, 2.0, 2.0))
    approx(u, 100.0)
    approx(v, 150.0)
    x, y, z = cam.backproject(100.0, 150.0, 2.0)
    approx(x, 1.0)
    approx(y, 2.0)
    approx(z, 2.0)
    assert cam.project_status((0.0, 0.0, -1.0)) == "behind_camera"

    # Pose exponential/logarithm round trip.
    pose = pv.Pose.exp((0.0, 0.0, math.pi / 4), (0.1, -0.2, 0.3))
    omega, nu, near_singular = pose.log()
    approx(omega[2], math.pi / 4)
    assert not near_singular
    identity = pose.compose(pose.inverse())
    approx(max(abs(identity.translation[i]) for i in range(3)), 0.0)

    # In-memory depth metrics: doubled prediction is perfect under median
    # scaling and abs_rel = 1 without it.
    gt = [1.0, 2.0, 3.0, 4.0, 0.0, 2.5]
    pred = [2.0 * d for d in gt]
    m = pv.depth_metrics(pred, gt, 3, 2, scale="median_ratio")
    approx(m["abs_rel"], 0.0, 1e-12)
    approx(m["delta1"], 1.0, 1e-12)
    m = pv.depth_metrics(pred, gt, 3, 2, scale="none")
    approx(m["abs_rel"], 1.0, 1e-12)

    # File-based pipeline: synth -> track -> fuse -> eval.
    work = Path(tempfile.mkdtemp(prefix="photovo_smoke_"))
    scene = {
        "camera": {
            "fx": 80.0,
            "fy": 80.0,
            "cx": 39.5,
            "cy": 29.5,
            "width": 80,
            "height": 60,
            "depth_scale": 0.0001,
        },
        "primitives": [
            {
                "type": "plane",
                "point": [0.0, 0.0, 1.0],
                "normal": [0.1, 0.0, -1.0],
                "texture": {
                    "offset": 0.5,
                    "amplitude": 0.4,
                    "freq_a": [6.0, 2.0, 0.5],
                    "freq_b": [-3.0, 5.0, 0.2],
                    "phase_a": 0.4,
                    "phase_b": 1.3,
                },
            }
        ],
        "trajectory": {
            "type": "orbit",
            "frames": 8,
            "angle_step_deg": 2.0,
            "axis": [0.1, 0.1, 0.99],
            "translation_step": [0.012, 0.0, 0.0],
        },
        "timestep": 0.0333333,
    }
    scene_path = work / "scene.json"
    scene_path.write_text(json.dumps(scene))

    seq = work / "seq"
    out = pv.generate_sequence(scene_path, seq, seed=11)
    assert out["frames"] == 8

    run = work / "run"
    summary = pv.track_sequence(seq / "manifest.json", run)
    assert summary["frames_tracked"] == 8
    assert summary["failure_frame"] is None

    mesh = run / "mesh.ply"
    fused = pv.fuse_sequence(
        seq / "manifest.json",
        run / "keyframes.json",
        run / "trajectory.txt",
        mesh,
    )
    assert fused["triangle_count"] > 0
    assert mesh.read_text().startswith("ply\n")

    report = pv.evaluate_depth_dirs(
        seq / "depth",
        seq / "depth",
        run / "depth_report.json",
        scale="none",
        pred_scale=0.0001,
        gt_scale=0.0001,
    )
    assert report["images"] == 8
    approx(report["aggregate"]["abs_rel"], 0.0, 1e-12)

    print("photovo_py smoke test: OK")


if __name__ == "__main__":
    main()
