//! Pipeline configuration, read from and written as TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [simulate]            # or [reconstruction], never both
//! duration_s = 3000.0
//!
//! [conditioning]
//! voxel_size = 0.02     # unset values are derived from the cloud
//!
//! [frame]
//! mode = "planes"
//!
//! [scale]
//! c = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Rotation, Vec3};
use crate::motion::{scale_from_known_length, ScaleReference};
use crate::pointcloud::{ConditioningParams, Primitive};
use crate::sim::{InertiaModel, RigidBodyState, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionSection>,
    #[serde(default)]
    pub conditioning: ConditioningSection,
    #[serde(default)]
    pub frame: FrameSection,
    #[serde(default)]
    pub scale: ScaleSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Simulated target: dynamics, camera placement, synthetic point cloud and
/// pose noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub duration_s: f64,
    pub sample_interval_s: f64,
    /// Overrides `sample_interval_s` with `1 / frame_rate_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_rate_hz: Option<f64>,
    /// Overrides `duration_s` so that exactly this many frames are produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    /// Capped at the sample interval.
    pub integrator_dt_s: f64,
    pub inertia_kg_m2: [f64; 3],
    pub torque_n_m: [f64; 3],
    pub omega0_deg_s: [f64; 3],
    pub velocity_m_s: [f64; 3],
    pub attitude0_wxyz: [f64; 4],
    pub camera_position_m: [f64; 3],
    /// Box-shaped target, edge lengths along body x, y, z.
    pub target_size_m: [f64; 3],
    pub cloud_spacing_m: f64,
    pub cloud_noise_m: f64,
    /// Reconstruction units per meter applied to trajectory and cloud.
    pub sfm_units_per_m: f64,
    pub noise_rot_deg: f64,
    /// Center noise, reconstruction units.
    pub noise_trans: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let base = SimConfig::tumbling_cubesat();
        let q = base.initial.attitude.quaternion();
        Self {
            duration_s: base.duration,
            sample_interval_s: base.sample_interval,
            frame_rate_hz: None,
            frames: None,
            integrator_dt_s: base.integrator_dt,
            inertia_kg_m2: base.inertia.moments().into(),
            torque_n_m: [0.0; 3],
            omega0_deg_s: base.initial.omega.map(f64::to_degrees).into(),
            velocity_m_s: base.initial.velocity.into(),
            attitude0_wxyz: q,
            camera_position_m: base.camera_position.into(),
            target_size_m: [0.1, 0.1, 0.3],
            cloud_spacing_m: 0.005,
            cloud_noise_m: 0.0,
            sfm_units_per_m: 1.0,
            noise_rot_deg: 0.0,
            noise_trans: 0.0,
        }
    }
}

impl SimulateSection {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let [w, x, y, z] = self.attitude0_wxyz;
        let [ixx, iyy, izz] = self.inertia_kg_m2;
        let sample_interval = match self.frame_rate_hz {
            Some(hz) if hz > 0.0 && hz.is_finite() => 1.0 / hz,
            Some(hz) => return Err(Error::Config(format!("frame_rate_hz must be positive, got {hz}"))),
            None => self.sample_interval_s,
        };
        let cfg = SimConfig {
            initial: RigidBodyState {
                attitude: Rotation::from_quaternion(w, x, y, z)?,
                omega: Vec3::from(self.omega0_deg_s).map(f64::to_radians),
                position: Vec3::zeros(),
                velocity: Vec3::from(self.velocity_m_s),
                time: 0.0,
            },
            inertia: InertiaModel::with_torque(ixx, iyy, izz, Vec3::from(self.torque_n_m))?,
            duration: self.duration_s,
            integrator_dt: self.integrator_dt_s.min(sample_interval),
            sample_interval,
            camera_position: Vec3::from(self.camera_position_m),
        };
        match self.frames {
            Some(n) => cfg.with_frame_count(n),
            None => {
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        self.to_sim_config()?;
        if self.target_size_m.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("target_size_m entries must be positive".into()));
        }
        if !(self.cloud_spacing_m > 0.0 && self.cloud_spacing_m.is_finite()) {
            return Err(Error::Config("cloud_spacing_m must be positive".into()));
        }
        if !(self.sfm_units_per_m > 0.0 && self.sfm_units_per_m.is_finite()) {
            return Err(Error::Config("sfm_units_per_m must be positive".into()));
        }
        for (name, v) in [
            ("cloud_noise_m", self.cloud_noise_m),
            ("noise_rot_deg", self.noise_rot_deg),
            ("noise_trans", self.noise_trans),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionFormat {
    /// `reconstruction.json`.
    Opensfm,
    /// `images.txt` plus `points3D.txt`.
    Colmap,
    /// Internal trajectory CSV plus an optional PLY cloud.
    Trajectory,
}

/// Existing reconstruction files. Relative paths are resolved against the
/// directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSection {
    pub format: ReconstructionFormat,
    /// Reconstruction JSON, `images.txt`, or trajectory CSV.
    pub path: PathBuf,
    /// `points3D.txt` for the text dialect, a PLY cloud otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    /// `tracks.csv` accompanying a reconstruction JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracks: Option<PathBuf>,
    /// `name,time_s` lines; takes precedence over `frame_rate_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<PathBuf>,
    /// Processing frame rate used to time shots ordered by name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate_hz: Option<f64>,
    /// Ground-truth CSV for evaluation, in reconstruction axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_inertia_kg_m2: Option<[f64; 3]>,
}

pub const DEFAULT_FRAME_RATE_HZ: f64 = 30.0;

/// Unset values are derived from the cloud's median point spacing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxel_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ransac_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_inlier_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_planes: Option<usize>,
    /// Fill damaged faces of this primitive before computing the centroid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complete: Option<Primitive>,
}

impl ConditioningSection {
    pub fn resolve(&self, derived: ConditioningParams) -> ConditioningParams {
        ConditioningParams {
            radius: self.radius.unwrap_or(derived.radius),
            min_neighbors: self.min_neighbors.unwrap_or(derived.min_neighbors),
            voxel_size: self.voxel_size.unwrap_or(derived.voxel_size),
            ransac_threshold: self.ransac_threshold.unwrap_or(derived.ransac_threshold),
            max_iterations: self.max_iterations.unwrap_or(derived.max_iterations),
            min_inlier_fraction: self.min_inlier_fraction.unwrap_or(derived.min_inlier_fraction),
            max_planes: self.max_planes.unwrap_or(derived.max_planes),
        }
    }

    pub fn from_params(p: &ConditioningParams, complete: Option<Primitive>) -> Self {
        Self {
            radius: Some(p.radius),
            min_neighbors: Some(p.min_neighbors),
            voxel_size: Some(p.voxel_size),
            ransac_threshold: Some(p.ransac_threshold),
            max_iterations: Some(p.max_iterations),
            min_inlier_fraction: Some(p.min_inlier_fraction),
            max_planes: Some(p.max_planes),
            complete,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("voxel_size", self.voxel_size),
            ("ransac_threshold", self.ransac_threshold),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("conditioning.{name} must be positive, got {v}")));
                }
            }
        }
        if self.min_neighbors == Some(0) {
            return Err(Error::Config("conditioning.min_neighbors must be at least 1".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("conditioning.max_iterations must be at least 1".into()));
        }
        if let Some(f) = self.min_inlier_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!(
                    "conditioning.min_inlier_fraction must lie in [0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    /// Axes from the two dominant plane normals.
    #[default]
    Planes,
    /// Reconstruction axes.
    Identity,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    #[serde(default)]
    pub mode: FrameMode,
    /// Origin override; the conditioned-cloud centroid otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownLength {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub length_m: f64,
}

/// Meters per reconstruction unit: either `c` directly or a segment of
/// known length. Defaults to 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_length: Option<KnownLength>,
}

impl ScaleSection {
    pub fn resolve(&self) -> Result<ScaleReference> {
        match (&self.c, &self.known_length) {
            (Some(_), Some(_)) => Err(Error::Config(
                "scale: give either `c` or `known_length`, not both".into(),
            )),
            (Some(c), None) => ScaleReference::new(*c, "configured coefficient"),
            (None, Some(k)) => scale_from_known_length(&Vec3::from(k.a), &Vec3::from(k.b), k.length_m),
            (None, None) => Ok(ScaleReference {
                scale_c: 1.0,
                provenance: "default (reconstruction units taken as meters)".into(),
            }),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.simulate, &self.reconstruction) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "exactly one input source is allowed; found both [simulate] and [reconstruction]".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "no input source; add a [simulate] or a [reconstruction] section".into(),
                ))
            }
            (Some(s), None) => s.validate()?,
            (None, Some(r)) => {
                if let Some(hz) = r.frame_rate_hz {
                    if !(hz > 0.0 && hz.is_finite()) {
                        return Err(Error::Config(format!("frame_rate_hz must be positive, got {hz}")));
                    }
                }
                if r.format == ReconstructionFormat::Colmap && r.points.is_none() {
                    return Err(Error::Config("the text dialect needs `points` (points3D.txt)".into()));
                }
            }
        }
        self.conditioning.validate()?;
        self.scale.resolve()?;
        Ok(())
    }

    /// Resolves relative input paths against `base`.
    pub fn with_base_dir(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(r) = self.reconstruction.as_mut() {
            fix(&mut r.path);
            for p in [&mut r.points, &mut r.tracks, &mut r.timing, &mut r.truth]
                .into_iter()
                .flatten()
            {
                fix(p);
            }
        }
        self
    }
}
