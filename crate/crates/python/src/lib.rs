//! Python bindings. Arrays cross the boundary as lists of floats or of
//! 3- and 4-element rows; angles are degrees, as in the CLI reports.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sfm_tumble::config::{PipelineConfig, SimulateSection};
use sfm_tumble::geom::Pose;
use sfm_tumble::motion::{self, ScaleReference};
use sfm_tumble::pointcloud::{self, TargetFrame};
use sfm_tumble::{ingest, sim, Error, FrameTag, PointCloud, PoseTrajectory, Rotation, Vec3};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(v: &[Vec3]) -> Vec<[f64; 3]> {
    v.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Simulates the torque-free box and returns the sampled truth.
///
/// Unset arguments keep the defaults of a 300 s, 10 s-sampled tumble.
#[pyfunction]
#[pyo3(signature = (duration_s=None, sample_interval_s=None, omega0_deg_s=None, inertia_kg_m2=None))]
fn simulate<'py>(
    py: Python<'py>,
    duration_s: Option<f64>,
    sample_interval_s: Option<f64>,
    omega0_deg_s: Option<[f64; 3]>,
    inertia_kg_m2: Option<[f64; 3]>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut s = SimulateSection::default();
    s.duration_s = duration_s.unwrap_or(s.duration_s);
    s.sample_interval_s = sample_interval_s.unwrap_or(s.sample_interval_s);
    s.omega0_deg_s = omega0_deg_s.unwrap_or(s.omega0_deg_s);
    s.inertia_kg_m2 = inertia_kg_m2.unwrap_or(s.inertia_kg_m2);
    let cfg = s.to_sim_config().map_err(py_err)?;
    let states = py.detach(|| sim::simulate(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("time", states.iter().map(|s| s.time).collect::<Vec<_>>())?;
    out.set_item(
        "omega_deg_s",
        rows(&states.iter().map(|s| s.omega.map(f64::to_degrees)).collect::<Vec<_>>()),
    )?;
    out.set_item(
        "attitude_wxyz",
        states.iter().map(|s| s.attitude.quaternion()).collect::<Vec<_>>(),
    )?;
    out.set_item("position", rows(&states.iter().map(|s| s.position).collect::<Vec<_>>()))?;
    out.set_item("velocity", rows(&states.iter().map(|s| s.velocity).collect::<Vec<_>>()))?;
    Ok(out)
}

/// Linear and angular velocity from camera poses.
///
/// `attitudes_wxyz` are world-to-camera rotations and `centers` camera
/// centers, both in reconstruction coordinates. The target frame keeps the
/// reconstruction axes with its origin at `origin`.
#[pyfunction]
#[pyo3(signature = (times, attitudes_wxyz, centers, origin=[0.0; 3], scale_c=1.0))]
fn estimate_motion<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    attitudes_wxyz: Vec<[f64; 4]>,
    centers: Vec<[f64; 3]>,
    origin: [f64; 3],
    scale_c: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if times.len() != attitudes_wxyz.len() || times.len() != centers.len() {
        return Err(PyValueError::new_err(
            "times, attitudes and centers must have equal length",
        ));
    }
    let poses = times
        .iter()
        .zip(&attitudes_wxyz)
        .zip(&centers)
        .map(|((t, q), c)| Pose::new(Rotation::from_quaternion(q[0], q[1], q[2], q[3])?, Vec3::from(*c), *t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let traj = PoseTrajectory::new(poses, FrameTag::SfmGauge, "python").map_err(py_err)?;
    let frame = TargetFrame {
        origin: Vec3::from(origin),
        axes: Rotation::identity(),
    };
    let scale = ScaleReference::new(scale_c, "python argument").map_err(py_err)?;
    let est = py
        .detach(|| motion::estimate_motion(&traj, &frame, &scale))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("t_mid", est.records.iter().map(|r| r.t_mid).collect::<Vec<_>>())?;
    out.set_item("distance", est.records.iter().map(|r| r.l).collect::<Vec<_>>())?;
    out.set_item(
        "radial_speed",
        est.records.iter().map(|r| r.radial_speed).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "velocity",
        rows(&est.records.iter().map(|r| r.velocity).collect::<Vec<_>>()),
    )?;
    out.set_item("omega_deg_s", rows(&est.omega_deg_s()))?;
    Ok(out)
}

/// Least-squares `A sin(w t + phi) + c`; returns
/// `(amplitude, angular_frequency, phase, offset, rmse)`.
#[pyfunction]
fn fit_sine(times: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, f64, f64, f64)> {
    let f = motion::fit_sine(&times, &values).map_err(py_err)?;
    Ok((f.amplitude, f.angular_frequency, f.phase, f.offset, f.rmse_residual))
}

/// Sequential RANSAC planes as `(normal, offset, inlier_count)`.
#[pyfunction]
#[pyo3(signature = (points, max_planes, threshold, min_inlier_fraction=0.15, max_iterations=1000, seed=0))]
fn detect_planes(
    py: Python<'_>,
    points: Vec<[f64; 3]>,
    max_planes: usize,
    threshold: f64,
    min_inlier_fraction: f64,
    max_iterations: usize,
    seed: u64,
) -> PyResult<Vec<([f64; 3], f64, usize)>> {
    let cloud = PointCloud::new(points.into_iter().map(Vec3::from).collect());
    let planes = py
        .detach(|| pointcloud::detect_planes(&cloud, max_planes, threshold, min_inlier_fraction, max_iterations, seed))
        .map_err(py_err)?;
    Ok(planes
        .iter()
        .map(|p| (p.normal.into(), p.offset, p.inliers.len()))
        .collect())
}

/// Point coordinates of a PLY file.
#[pyfunction]
fn read_ply(path: PathBuf) -> PyResult<Vec<[f64; 3]>> {
    let bytes = std::fs::read(&path).map_err(|e| py_err(Error::io(&path, e)))?;
    let cloud = ingest::ply::read_ply(&bytes).map_err(py_err)?;
    Ok(rows(&cloud.points))
}

/// Runs the full pipeline from TOML text and returns the evaluation report
/// (or `None` without ground truth) and the written paths.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None))]
fn run_pipeline(
    py: Python<'_>,
    config_toml: &str,
    output_dir: Option<PathBuf>,
) -> PyResult<(Option<String>, Vec<PathBuf>)> {
    let mut cfg = PipelineConfig::from_toml(config_toml).map_err(py_err)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let out = py.detach(|| sfm_tumble::pipeline::run_pipeline(&cfg)).map_err(py_err)?;
    Ok((out.report.map(|r| r.to_json()), out.outputs))
}

#[pymodule]
#[pyo3(name = "sfm_tumble")]
fn sfm_tumble_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_motion, m)?)?;
    m.add_function(wrap_pyfunction!(fit_sine, m)?)?;
    m.add_function(wrap_pyfunction!(detect_planes, m)?)?;
    m.add_function(wrap_pyfunction!(read_ply, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
