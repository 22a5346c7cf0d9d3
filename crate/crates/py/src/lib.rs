//! Python bindings. Poses cross the boundary as 4x4 nested lists, twists as
//! `[wx, wy, wz, vx, vy, vz]`, point clouds as lists of `[x, y, z]`, and
//! reports as JSON strings.

use artreg::articulation::{detect as detect_joint, DetectionConfig};
use artreg::bench::{adi as adi_metric, run_benchmark, BenchConfig, BenchObject};
use artreg::cloud::{load_ply as read_ply, PointCloud};
use artreg::error::Error;
use artreg::liegroup::{exp_se3 as exp_map, log_se3 as log_map, Pose, Twist};
use artreg::mukf::{FilterConfig, ObjectTracker};
use artreg::segmentation::SegmentationConfig;
use artreg::sim::{builtin_scene, default_camera, SimEnvironment, BUILTIN_SCENES};
use nalgebra::{Matrix4, Vector3, Vector6};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::UnknownScene(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix_to_pose(m: Vec<Vec<f64>>) -> PyResult<Pose> {
    if m.len() != 4 || m.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("pose must be a 4x4 matrix"));
    }
    let h = Matrix4::from_fn(|i, j| m[i][j]);
    let pose = Pose::from_homogeneous(&h);
    if !pose.is_valid(1e-6) {
        return Err(PyValueError::new_err("pose rotation is not orthonormal"));
    }
    Ok(pose)
}

fn pose_to_matrix(p: &Pose) -> Vec<Vec<f64>> {
    let h = p.to_homogeneous();
    (0..4).map(|i| (0..4).map(|j| h[(i, j)]).collect()).collect()
}

fn to_cloud(points: Vec<[f64; 3]>) -> PointCloud {
    PointCloud::from_points(points.into_iter().map(Vector3::from).collect())
}

fn from_cloud(cloud: &PointCloud) -> Vec<[f64; 3]> {
    cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn filter_preset(name: &str) -> PyResult<FilterConfig> {
    match name {
        "default" => Ok(FilterConfig::default()),
        "tracking" => Ok(FilterConfig::tracking()),
        "interaction" => Ok(FilterConfig::interaction()),
        "pushing" => Ok(FilterConfig::pushing()),
        other => Err(PyValueError::new_err(format!("unknown filter preset: {other}"))),
    }
}

#[pyfunction]
fn exp_se3(xi: [f64; 6]) -> Vec<Vec<f64>> {
    pose_to_matrix(&exp_map(&Twist::from_vector(&Vector6::from(xi))))
}

#[pyfunction]
fn log_se3(pose: Vec<Vec<f64>>) -> PyResult<[f64; 6]> {
    Ok(log_map(&matrix_to_pose(pose)?).to_vector().into())
}

#[pyfunction]
fn adi(model: Vec<[f64; 3]>, gt: Vec<Vec<f64>>, est: Vec<Vec<f64>>) -> PyResult<f64> {
    adi_metric(&to_cloud(model), &matrix_to_pose(gt)?, &matrix_to_pose(est)?).map_err(to_py)
}

#[pyfunction]
fn load_ply(path: &str) -> PyResult<Vec<[f64; 3]>> {
    read_ply(path).map(|c| from_cloud(&c)).map_err(to_py)
}

#[pyfunction]
fn builtin_scenes() -> Vec<&'static str> {
    BUILTIN_SCENES.to_vec()
}

/// Runs joint-type detection on a builtin scene and returns the report JSON.
/// A run that ends without a consistent belief raises RuntimeError.
#[pyfunction]
#[pyo3(signature = (scene, seed, noise_sigma = 0.0))]
fn detect(scene: &str, seed: u64, noise_sigma: f64) -> PyResult<String> {
    let scene = builtin_scene(scene).map_err(to_py)?;
    let mut env = SimEnvironment::new(scene, default_camera().with_noise(noise_sigma, 0.0, seed));
    let config = DetectionConfig { seed, ..Default::default() };
    let report = detect_joint(&mut env, &FilterConfig::interaction(), &SegmentationConfig::default(), &config).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

/// Runs the ADI benchmark over builtin objects and returns the report JSON.
#[pyfunction]
#[pyo3(name = "bench", signature = (objects, trials, seed))]
fn benchmark(objects: Vec<String>, trials: usize, seed: u64) -> PyResult<String> {
    let objects = objects.iter().map(|n| BenchObject::builtin(n)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let config = BenchConfig {
        trials_per_object: trials,
        ..Default::default()
    };
    run_benchmark(&objects, &config, seed).and_then(|r| r.to_json()).map_err(to_py)
}

/// Single-object pose filter fed with clouds already cut down to the object.
#[pyclass(name = "Tracker")]
struct PyTracker {
    inner: ObjectTracker,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (model, initial, seed, preset = "tracking"))]
    fn new(model: Vec<[f64; 3]>, initial: Vec<Vec<f64>>, seed: u64, preset: &str) -> PyResult<Self> {
        let config = filter_preset(preset)?;
        let inner = ObjectTracker::new(to_cloud(model), matrix_to_pose(initial)?, &config, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// One predict/update cycle; returns the Kalman gain norm.
    fn step(&mut self, cloud: Vec<[f64; 3]>) -> PyResult<f64> {
        self.inner.step_with_cloud(&to_cloud(cloud), None).map_err(to_py)
    }

    fn pose(&self) -> Vec<Vec<f64>> {
        pose_to_matrix(&self.inner.pose())
    }
}

#[pymodule]
#[pyo3(name = "artreg")]
fn artreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(exp_se3, m)?)?;
    m.add_function(wrap_pyfunction!(log_se3, m)?)?;
    m.add_function(wrap_pyfunction!(adi, m)?)?;
    m.add_function(wrap_pyfunction!(load_ply, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenes, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_class::<PyTracker>()?;
    Ok(())
}
