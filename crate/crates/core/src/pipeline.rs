//! End-to-end pipeline: input (simulation or reconstruction files) →
//! point-cloud conditioning → target frame → motion estimate → evaluation.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::cloud::{FeatureReport, PointCloud};
use crate::config::{
    ConditioningSection, FrameMode, FrameSection, PipelineConfig, ReconstructionFormat, ReconstructionSection,
    SimulateSection, DEFAULT_FRAME_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, series_csv, EvalReport, TruthSeries};
use crate::geom::{Rotation, Vec3};
use crate::ingest::{self, colmap, opensfm, ply, Reconstruction};
use crate::motion::{estimate_motion, MotionEstimate};
use crate::pointcloud::{
    centroid, complete_shape, condition, define_target_frame, Conditioned, ConditioningParams, Plane, TargetFrame,
};
use crate::sim::{inject_pose_noise, read_truth_csv, simulate, to_camera_trajectory, write_truth_csv, InertiaModel};
use crate::trajectory::{FrameTag, PoseTrajectory};

/// Trajectory, cloud and optional ground truth entering the pipeline.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub trajectory: PoseTrajectory,
    pub cloud: PointCloud,
    pub features: Option<FeatureReport>,
    pub truth: Option<TruthSeries>,
}

/// Points on the six faces of a box centered at the origin, on a regular
/// grid of roughly `spacing`, optionally jittered by isotropic Gaussian
/// noise.
pub fn sample_box_surface(size: [f64; 3], spacing: f64, noise: f64, seed: u64) -> Result<PointCloud> {
    if size.iter().any(|s| !(*s > 0.0)) || !(spacing > 0.0) || !(noise >= 0.0) {
        return Err(Error::invalid(
            "box size and spacing must be positive, noise non-negative",
        ));
    }
    let counts = size.map(|s| ((s / spacing).round() as usize).max(1));
    let mut points = Vec::new();
    for k in 0..3 {
        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
        for sign in [1.0, -1.0] {
            for a in 0..counts[j] {
                for b in 0..counts[l] {
                    let mut p = Vec3::zeros();
                    p[k] = sign * 0.5 * size[k];
                    p[j] = -0.5 * size[j] + (a as f64 + 0.5) * size[j] / counts[j] as f64;
                    p[l] = -0.5 * size[l] + (b as f64 + 0.5) * size[l] / counts[l] as f64;
                    points.push(p);
                }
            }
        }
    }
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
        for p in points.iter_mut() {
            *p += Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
        }
    }
    Ok(PointCloud::new(points))
}

pub fn load_simulation(s: &SimulateSection, seed: u64) -> Result<Inputs> {
    let cfg = s.to_sim_config()?;
    let states = simulate(&cfg)?;
    let clean = to_camera_trajectory(&states, &cfg.camera_position)?;
    let mut trajectory = clean.transform_world(&Rotation::identity(), s.sfm_units_per_m)?;
    trajectory = inject_pose_noise(&trajectory, s.noise_rot_deg, s.noise_trans, seed)?;
    let mut cloud = sample_box_surface(
        s.target_size_m,
        s.cloud_spacing_m,
        s.cloud_noise_m,
        seed.wrapping_add(1),
    )?;
    for p in cloud.points.iter_mut() {
        *p *= s.sfm_units_per_m;
    }
    Ok(Inputs {
        trajectory,
        cloud,
        features: None,
        truth: Some(TruthSeries::new(states, Some(cfg.inertia))?),
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_reconstruction(r: &ReconstructionSection) -> Result<Inputs> {
    let main = read(&r.path)?;
    let mut rec = match r.format {
        ReconstructionFormat::Opensfm => {
            let mut rec = opensfm::parse_reconstruction_json(&main)?;
            if let Some(tracks) = &r.tracks {
                rec.features = Some(opensfm::feature_report_from_tracks(&rec, &read(tracks)?)?);
            }
            rec
        }
        ReconstructionFormat::Colmap => {
            let points = r
                .points
                .as_ref()
                .ok_or_else(|| Error::Config("the text dialect needs `points`".into()))?;
            colmap::parse_colmap_text(&main, &read(points)?)?
        }
        ReconstructionFormat::Trajectory => {
            let text = String::from_utf8(main).map_err(|_| Error::parse(r.path.display().to_string(), "not UTF-8"))?;
            let trajectory = ingest::read_trajectory_csv(&text, FrameTag::SfmGauge, "trajectory csv")?;
            let cloud = match &r.points {
                Some(p) => ply::read_ply(&read(p)?)?,
                None => PointCloud::default(),
            };
            Reconstruction {
                trajectory,
                cloud,
                features: None,
                dropped_points: 0,
            }
        }
    };
    if r.format != ReconstructionFormat::Trajectory || r.frame_rate_hz.is_some() || r.timing.is_some() {
        rec = match (&r.timing, r.frame_rate_hz) {
            (Some(t), _) => ingest::apply_timing_sidecar(&rec, &read_text(t)?)?,
            (None, hz) => ingest::apply_frame_rate(&rec, hz.unwrap_or(DEFAULT_FRAME_RATE_HZ))?,
        };
    }
    let truth = match &r.truth {
        Some(path) => {
            let states = read_truth_csv(&read_text(path)?)?;
            let inertia = r
                .truth_inertia_kg_m2
                .map(|[a, b, c]| InertiaModel::new(a, b, c))
                .transpose()?;
            Some(TruthSeries::new(states, inertia)?)
        }
        None => None,
    };
    Ok(Inputs {
        trajectory: rec.trajectory,
        cloud: rec.cloud,
        features: rec.features,
        truth,
    })
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    match (&cfg.simulate, &cfg.reconstruction) {
        (Some(s), None) => load_simulation(s, cfg.seed).map_err(|e| e.in_stage("simulate")),
        (None, Some(r)) => load_reconstruction(r).map_err(|e| e.in_stage("ingest")),
        _ => Err(Error::Config("exactly one input source is required".into())),
    }
}

/// Outlier removal, down-sampling, plane detection and optional shape
/// completion with the section's settings (unset ones derived from `cloud`).
pub fn condition_stage(
    cloud: &PointCloud,
    section: &ConditioningSection,
    seed: u64,
) -> Result<(Conditioned, ConditioningParams)> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("point cloud is empty".into()));
    }
    let derived = ConditioningParams::from_cloud(cloud)?;
    let params = section.resolve(derived);
    let mut out = condition(cloud, &params, seed)?;
    if let Some(primitive) = section.complete {
        out.cloud = complete_shape(&out.cloud, primitive, &out.planes)?;
    }
    Ok((out, params))
}

pub fn frame_stage(cloud: &PointCloud, planes: &[Plane], section: &FrameSection) -> Result<TargetFrame> {
    let origin = match section.origin {
        Some(o) => Vec3::from(o),
        None => centroid(cloud)?,
    };
    match section.mode {
        FrameMode::Planes => define_target_frame(planes, origin),
        FrameMode::Identity => Ok(TargetFrame {
            origin,
            axes: Rotation::identity(),
        }),
    }
}

#[derive(Serialize)]
struct PlaneJson {
    normal: [f64; 3],
    offset: f64,
    inliers: usize,
}

pub fn planes_to_json(planes: &[Plane]) -> String {
    let list: Vec<PlaneJson> = planes
        .iter()
        .map(|p| PlaneJson {
            normal: p.normal.into(),
            offset: p.offset,
            inliers: p.inliers.len(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&list).expect("planes serialize");
    s.push('\n');
    s
}

pub fn write_output(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn summary_json(estimate: &MotionEstimate) -> String {
    let mut s = serde_json::to_string_pretty(&estimate.summary()).expect("summary serializes");
    s.push('\n');
    s
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub estimate: MotionEstimate,
    pub report: Option<EvalReport>,
    pub frame: TargetFrame,
    pub params: ConditioningParams,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock time; kept out of the written artifacts so that they
    /// stay byte-identical between runs.
    pub runtime: Duration,
}

/// Runs every stage and writes the artifacts into `cfg.output_dir`:
/// `trajectory.csv`, `truth.csv` (simulation), `features.csv` (when
/// available), `cloud_conditioned.ply`, `planes.json`, `frame.json`,
/// `motion.csv`, `motion_summary.json`, `eval.json` and `eval_series.csv`
/// (when ground truth exists) and `effective_config.toml`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    let mut outputs = Vec::new();
    let write = |name: &str, bytes: &[u8], outputs: &mut Vec<PathBuf>| -> Result<()> {
        outputs.push(write_output(dir, name, bytes).map_err(|e| e.in_stage("write"))?);
        Ok(())
    };

    let inputs = load_inputs(cfg)?;
    write(
        "trajectory.csv",
        ingest::write_trajectory_csv(&inputs.trajectory).as_bytes(),
        &mut outputs,
    )?;
    if let Some(truth) = inputs.truth.as_ref().filter(|_| cfg.simulate.is_some()) {
        let csv = write_truth_csv(truth.states()).map_err(|e| e.in_stage("simulate"))?;
        write("truth.csv", csv.as_bytes(), &mut outputs)?;
    }
    if let Some(f) = &inputs.features {
        write("features.csv", f.to_csv().as_bytes(), &mut outputs)?;
    }

    let (conditioned, params) =
        condition_stage(&inputs.cloud, &cfg.conditioning, cfg.seed).map_err(|e| e.in_stage("condition"))?;
    write(
        "cloud_conditioned.ply",
        &ply::write_ply(&conditioned.cloud),
        &mut outputs,
    )?;
    write(
        "planes.json",
        planes_to_json(&conditioned.planes).as_bytes(),
        &mut outputs,
    )?;

    let frame = frame_stage(&conditioned.cloud, &conditioned.planes, &cfg.frame).map_err(|e| e.in_stage("frame"))?;
    write("frame.json", frame.to_json().as_bytes(), &mut outputs)?;

    let scale = cfg.scale.resolve().map_err(|e| e.in_stage("estimate"))?;
    let estimate = estimate_motion(&inputs.trajectory, &frame, &scale).map_err(|e| e.in_stage("estimate"))?;
    write("motion.csv", estimate.to_csv().as_bytes(), &mut outputs)?;
    write("motion_summary.json", summary_json(&estimate).as_bytes(), &mut outputs)?;

    let report = match &inputs.truth {
        Some(truth) => {
            let r = evaluate(&estimate, truth, &frame.axes.inverse()).map_err(|e| e.in_stage("evaluate"))?;
            write("eval.json", r.to_json().as_bytes(), &mut outputs)?;
            let series = series_csv(&estimate, truth, &frame.axes.inverse()).map_err(|e| e.in_stage("evaluate"))?;
            write("eval_series.csv", series.as_bytes(), &mut outputs)?;
            Some(r)
        }
        None => None,
    };

    let mut effective = cfg.clone();
    effective.conditioning = ConditioningSection::from_params(&params, cfg.conditioning.complete);
    write("effective_config.toml", effective.to_toml().as_bytes(), &mut outputs)?;

    Ok(PipelineOutcome {
        estimate,
        report,
        frame,
        params,
        outputs,
        runtime: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_surface_is_centered() {
        let c = sample_box_surface([0.1, 0.1, 0.3], 0.01, 0.0, 0).unwrap();
        assert_eq!(c.len(), 2 * (10 * 30 + 30 * 10 + 10 * 10));
        assert!(centroid(&c).unwrap().norm() < 1e-15);
    }

    #[test]
    fn missing_file_names_path_and_stage() {
        let cfg = PipelineConfig::from_toml(
            "[reconstruction]\nformat = \"opensfm\"\npath = \"/nonexistent/reconstruction.json\"\n",
        )
        .unwrap();
        let err = run_pipeline(&cfg).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("ingest") && msg.contains("/nonexistent/reconstruction.json"),
            "{msg}"
        );
    }
}
