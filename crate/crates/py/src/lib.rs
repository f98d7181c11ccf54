//! Python bindings: the pinhole camera and SE(3) pose types plus the
//! path-based pipeline entry points (synth, track, fuse, eval) and an
//! in-memory depth-metrics helper.

use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use photovo_core::eval::{self, ScaleMode};
use photovo_core::geom::{self, Projection};
use photovo_core::imgproc::DepthImage;
use photovo_core::pipeline::{self, PipelineConfig, ReportUnits};

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct PinholeCamera {
    inner: geom::PinholeCamera,
}

#[pymethods]
impl PinholeCamera {
    #[new]
    fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> PyResult<Self> {
        Ok(Self {
            inner: geom::PinholeCamera::new(fx, fy, cx, cy, width, height)
                .map_err(value_err)?,
        })
    }

    #[getter]
    fn fx(&self) -> f64 {
        self.inner.fx
    }

    #[getter]
    fn fy(&self) -> f64 {
        self.inner.fy
    }

    #[getter]
    fn cx(&self) -> f64 {
        self.inner.cx
    }

    #[getter]
    fn cy(&self) -> f64 {
        self.inner.cy
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    /// Pixel (u, v) for an in-view camera-frame point, else None.
    fn project(&self, point: (f64, f64, f64)) -> Option<(f64, f64)> {
        self.inner
            .project(&Vector3::new(point.0, point.1, point.2))
            .in_view()
            .map(|p| (p.x, p.y))
    }

    /// One of "in_view", "out_of_view" or "behind_camera".
    fn project_status(&self, point: (f64, f64, f64)) -> &'static str {
        match self
            .inner
            .project(&Vector3::new(point.0, point.1, point.2))
        {
            Projection::InView(_) => "in_view",
            Projection::OutOfView(_) => "out_of_view",
            Projection::BehindCamera => "behind_camera",
        }
    }

    fn backproject(&self, u: f64, v: f64, depth: f64) -> PyResult<(f64, f64, f64)> {
        let p = self.inner.backproject(u, v, depth).map_err(value_err)?;
        Ok((p.x, p.y, p.z))
    }

    /// Camera for pyramid level `level`.
    fn scaled(&self, level: u32) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.scaled(level).map_err(value_err)?,
        })
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Pose {
    inner: geom::Pose,
}

#[pymethods]
impl Pose {
    #[new]
    fn new() -> Self {
        Self {
            inner: geom::Pose::identity(),
        }
    }

    /// Exponential map from a twist: rotation part `omega` (axis-angle,
    /// radians) and translation part `nu` (meters).
    #[staticmethod]
    fn exp(omega: (f64, f64, f64), nu: (f64, f64, f64)) -> Self {
        Self {
            inner: geom::Twist::new(
                Vector3::new(omega.0, omega.1, omega.2),
                Vector3::new(nu.0, nu.1, nu.2),
            )
            .exp(),
        }
    }

    /// Logarithmic map: ((omega, nu), near_singular).
    fn log(&self) -> ((f64, f64, f64), (f64, f64, f64), bool) {
        let (twist, near) = self.inner.log();
        (
            (twist.omega.x, twist.omega.y, twist.omega.z),
            (twist.nu.x, twist.nu.y, twist.nu.z),
            near,
        )
    }

    fn compose(&self, other: &Pose) -> Self {
        Self {
            inner: self.inner.compose(&other.inner),
        }
    }

    fn inverse(&self) -> Self {
        Self {
            inner: self.inner.inverse(),
        }
    }

    fn transform(&self, point: (f64, f64, f64)) -> (f64, f64, f64) {
        let p = self
            .inner
            .transform(&Vector3::new(point.0, point.1, point.2));
        (p.x, p.y, p.z)
    }

    #[getter]
    fn translation(&self) -> (f64, f64, f64) {
        let t = self.inner.translation();
        (t.x, t.y, t.z)
    }

    /// Unit quaternion as (qx, qy, qz, qw).
    fn quaternion(&self) -> (f64, f64, f64, f64) {
        let q = self.inner.unit_quaternion().into_inner();
        (q.i, q.j, q.k, q.w)
    }

    /// Homogeneous 4x4 matrix, row-major nested lists.
    fn matrix(&self) -> Vec<Vec<f64>> {
        let m = self.inner.matrix();
        (0..4)
            .map(|r| (0..4).map(|c| m[(r, c)]).collect())
            .collect()
    }
}

fn parse_config(config_json: Option<&str>) -> PyResult<PipelineConfig> {
    match config_json {
        None => Ok(PipelineConfig::default()),
        Some(text) => {
            let cfg: PipelineConfig = serde_json::from_str(text).map_err(value_err)?;
            cfg.validate().map_err(value_err)?;
            Ok(cfg)
        }
    }
}

/// Render a synthetic pseudo-RGBD sequence from a scene JSON file.
#[pyfunction]
#[pyo3(signature = (scene, out_dir, seed = 0))]
fn generate_sequence(py: Python<'_>, scene: PathBuf, out_dir: PathBuf, seed: u64) -> PyResult<Py<PyDict>> {
    let summary = pipeline::run_synth(&scene, &out_dir, seed).map_err(runtime_err)?;
    let dict = PyDict::new(py);
    dict.set_item("frames", summary.frames)?;
    dict.set_item("out_dir", summary.out_dir.display().to_string())?;
    Ok(dict.into())
}

/// Track a sequence manifest; writes trajectory, keyframes and diagnostics.
#[pyfunction]
#[pyo3(signature = (manifest, out_dir, config_json = None))]
fn track_sequence(
    py: Python<'_>,
    manifest: PathBuf,
    out_dir: PathBuf,
    config_json: Option<&str>,
) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_json)?;
    let summary = pipeline::run_track(&manifest, &config, &out_dir).map_err(runtime_err)?;
    let dict = PyDict::new(py);
    dict.set_item("frames_tracked", summary.frames_tracked)?;
    dict.set_item("keyframe_count", summary.keyframe_count)?;
    dict.set_item("failure_frame", summary.failure_frame)?;
    dict.set_item("mean_frame_ms", summary.mean_frame_ms)?;
    dict.set_item("total_seconds", summary.total_seconds)?;
    Ok(dict.into())
}

/// Fuse tracked keyframes into a TSDF volume and write the mesh as PLY.
#[pyfunction]
#[pyo3(signature = (manifest, keyframes, trajectory, out_mesh, config_json = None))]
fn fuse_sequence(
    py: Python<'_>,
    manifest: PathBuf,
    keyframes: PathBuf,
    trajectory: PathBuf,
    out_mesh: PathBuf,
    config_json: Option<&str>,
) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_json)?;
    let summary = pipeline::run_fuse(&manifest, &keyframes, &trajectory, &config, &out_mesh)
        .map_err(runtime_err)?;
    let dict = PyDict::new(py);
    dict.set_item("views_integrated", summary.views_integrated)?;
    dict.set_item("voxel_dims", summary.voxel_dims)?;
    dict.set_item("voxel_count", summary.voxel_count)?;
    dict.set_item("vertex_count", summary.vertex_count)?;
    dict.set_item("triangle_count", summary.triangle_count)?;
    dict.set_item("integrate_seconds", summary.integrate_seconds)?;
    Ok(dict.into())
}

fn metrics_dict(py: Python<'_>, m: &eval::DepthMetrics) -> PyResult<Py<PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("abs_rel", m.abs_rel)?;
    dict.set_item("sq_rel", m.sq_rel)?;
    dict.set_item("rmse", m.rmse)?;
    dict.set_item("rmse_log", m.rmse_log)?;
    dict.set_item("delta1", m.delta1)?;
    dict.set_item("delta2", m.delta2)?;
    dict.set_item("delta3", m.delta3)?;
    dict.set_item("n_pixels", m.n_pixels)?;
    Ok(dict.into())
}

/// Evaluate predicted depth PNGs against ground truth matched by file name.
#[pyfunction]
#[pyo3(signature = (pred_dir, gt_dir, out_json, scale = "none", units = "mm",
                     pred_scale = None, gt_scale = None))]
#[allow(clippy::too_many_arguments)]
fn evaluate_depth_dirs(
    py: Python<'_>,
    pred_dir: PathBuf,
    gt_dir: PathBuf,
    out_json: PathBuf,
    scale: &str,
    units: &str,
    pred_scale: Option<f64>,
    gt_scale: Option<f64>,
) -> PyResult<Py<PyDict>> {
    let mode = ScaleMode::from_str(scale).map_err(value_err)?;
    let units = match units {
        "mm" => ReportUnits::Millimeters,
        "m" => ReportUnits::Meters,
        other => return Err(value_err(format!("unknown units {other:?}"))),
    };
    let summary = pipeline::run_eval(
        &pred_dir, &gt_dir, mode, units, pred_scale, gt_scale, &out_json,
    )
    .map_err(runtime_err)?;
    let dict = PyDict::new(py);
    dict.set_item("images", summary.images)?;
    dict.set_item("aggregate", metrics_dict(py, &summary.aggregate)?)?;
    Ok(dict.into())
}

/// Depth metrics over row-major buffers; non-positive values are invalid.
#[pyfunction]
#[pyo3(signature = (pred, gt, width, height, scale = "none"))]
fn depth_metrics(
    py: Python<'_>,
    pred: Vec<f64>,
    gt: Vec<f64>,
    width: usize,
    height: usize,
    scale: &str,
) -> PyResult<Py<PyDict>> {
    let mode = ScaleMode::from_str(scale).map_err(value_err)?;
    let pred = DepthImage::from_data(width, height, pred).map_err(value_err)?;
    let gt = DepthImage::from_data(width, height, gt).map_err(value_err)?;
    let metrics = eval::depth_metrics(&pred, &gt, mode).map_err(runtime_err)?;
    metrics_dict(py, &metrics)
}

#[pymodule]
fn photovo_py(m: &Bound<PyModule>) -> PyResult<()> {
    m.add_class::<PinholeCamera>()?;
    m.add_class::<Pose>()?;
    m.add_function(wrap_pyfunction!(generate_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(track_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_depth_dirs, m)?)?;
    m.add_function(wrap_pyfunction!(depth_metrics, m)?)?;
    Ok(())
}
