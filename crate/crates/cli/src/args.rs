//! Flag groups shared by the subcommands and their merge into a config.
//! A flag that is given always wins over the config file.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sfm_tumble::config::{
    ConditioningSection, FrameMode, FrameSection, KnownLength, PipelineConfig, ReconstructionFormat,
    ReconstructionSection, ScaleSection, SimulateSection,
};
use sfm_tumble::pointcloud::Primitive;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    /// `reconstruction.json` (optionally with `tracks.csv`).
    Opensfm,
    /// `images.txt` plus `points3D.txt`.
    Colmap,
    /// This tool's own `trajectory.csv` plus an optional PLY cloud.
    Trajectory,
}

impl From<Format> for ReconstructionFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Opensfm => ReconstructionFormat::Opensfm,
            Format::Colmap => ReconstructionFormat::Colmap,
            Format::Trajectory => ReconstructionFormat::Trajectory,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Shape {
    Cube,
    Cylinder,
}

impl From<Shape> for Primitive {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Cube => Primitive::Cube,
            Shape::Cylinder => Primitive::Cylinder,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Axes {
    /// Axes from the two dominant plane normals.
    Planes,
    /// Keep the reconstruction axes.
    Identity,
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Simulation")]
pub struct SimFlags {
    /// Simulated span, seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Time between emitted frames, seconds.
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Frame rate; overrides --sample-interval.
    #[arg(long)]
    pub frame_rate: Option<f64>,
    /// Exact number of frames; overrides --duration.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Principal moments of inertia, kg m^2.
    #[arg(long, value_parser = triple, value_name = "IXX,IYY,IZZ", allow_hyphen_values = true)]
    pub inertia: Option<[f64; 3]>,
    /// Initial body rate, deg/s.
    #[arg(long, value_parser = triple, value_name = "WX,WY,WZ", allow_hyphen_values = true)]
    pub omega0: Option<[f64; 3]>,
    /// Translational velocity, m/s.
    #[arg(long, value_parser = triple, value_name = "VX,VY,VZ", allow_hyphen_values = true)]
    pub velocity: Option<[f64; 3]>,
    /// Camera position in the inertial frame, m.
    #[arg(long, value_parser = triple, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub camera: Option<[f64; 3]>,
    /// Pose noise: rotation sigma, degrees.
    #[arg(long)]
    pub noise_rot_deg: Option<f64>,
    /// Pose noise: camera-center sigma, reconstruction units.
    #[arg(long)]
    pub noise_trans: Option<f64>,
    /// Synthetic cloud noise sigma, m.
    #[arg(long)]
    pub cloud_noise: Option<f64>,
    /// Reconstruction units per meter.
    #[arg(long)]
    pub units_per_m: Option<f64>,
}

/// Parses exactly `N` comma-separated numbers.
pub fn floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

pub fn triple(s: &str) -> Result<[f64; 3], String> {
    floats::<3>(s)
}

fn vec3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

impl SimFlags {
    pub fn apply(&self, s: &mut SimulateSection) {
        macro_rules! set {
            ($flag:ident => $field:ident) => {
                if let Some(v) = self.$flag {
                    s.$field = v;
                }
            };
        }
        set!(duration => duration_s);
        set!(sample_interval => sample_interval_s);
        set!(noise_rot_deg => noise_rot_deg);
        set!(noise_trans => noise_trans);
        set!(cloud_noise => cloud_noise_m);
        set!(units_per_m => sfm_units_per_m);
        if self.frame_rate.is_some() {
            s.frame_rate_hz = self.frame_rate;
        }
        if self.frames.is_some() {
            s.frames = self.frames;
        }
        for (flag, field) in [
            (&self.inertia, &mut s.inertia_kg_m2),
            (&self.omega0, &mut s.omega0_deg_s),
            (&self.velocity, &mut s.velocity_m_s),
            (&self.camera, &mut s.camera_position_m),
        ] {
            if let Some(v) = flag {
                *field = *v;
            }
        }
    }
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Reconstruction input")]
pub struct ReconFlags {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Reconstruction JSON, images.txt, or trajectory CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// points3D.txt for the text dialect, a PLY cloud otherwise.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// tracks.csv for per-frame feature counts.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// `name,time_s` sidecar; takes precedence over --fps.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Processing frame rate used to time the shots.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Ground-truth CSV to evaluate against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Principal moments used to resample the truth by integration.
    #[arg(long, value_parser = triple, value_name = "IXX,IYY,IZZ")]
    pub truth_inertia: Option<[f64; 3]>,
}

impl ReconFlags {
    pub fn is_set(&self) -> bool {
        self.format.is_some() || self.input.is_some()
    }

    /// Merges into `base`; `format` and `input` are required when there is
    /// no base section.
    pub fn apply(&self, base: Option<ReconstructionSection>) -> anyhow::Result<ReconstructionSection> {
        let mut r = match base {
            Some(r) => r,
            None => ReconstructionSection {
                format: self
                    .format
                    .ok_or_else(|| anyhow::anyhow!("--format is required without a [reconstruction] config"))?
                    .into(),
                path: self
                    .input
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("--input is required without a [reconstruction] config"))?,
                points: None,
                tracks: None,
                timing: None,
                frame_rate_hz: None,
                truth: None,
                truth_inertia_kg_m2: None,
            },
        };
        if let Some(f) = self.format {
            r.format = f.into();
        }
        if let Some(p) = &self.input {
            r.path = p.clone();
        }
        for (flag, field) in [
            (&self.points, &mut r.points),
            (&self.tracks, &mut r.tracks),
            (&self.timing, &mut r.timing),
            (&self.truth, &mut r.truth),
        ] {
            if flag.is_some() {
                *field = flag.clone();
            }
        }
        if self.fps.is_some() {
            r.frame_rate_hz = self.fps;
        }
        if self.truth_inertia.is_some() {
            r.truth_inertia_kg_m2 = self.truth_inertia;
        }
        Ok(r)
    }
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Point-cloud conditioning (unset values derive from point spacing)")]
pub struct ConditionFlags {
    /// Radius outlier removal: neighborhood radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Radius outlier removal: neighbors required within the radius.
    #[arg(long)]
    pub min_neighbors: Option<usize>,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    /// RANSAC inlier distance.
    #[arg(long)]
    pub ransac_threshold: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Stop once a plane holds less than this share of the input.
    #[arg(long)]
    pub min_inlier_fraction: Option<f64>,
    #[arg(long)]
    pub max_planes: Option<usize>,
    /// Fill unobserved faces of this primitive before taking the centroid.
    #[arg(long, value_enum)]
    pub complete: Option<Shape>,
}

impl ConditionFlags {
    pub fn apply(&self, c: &mut ConditioningSection) {
        macro_rules! set {
            ($($f:ident),*) => {
                $(if self.$f.is_some() {
                    c.$f = self.$f;
                })*
            };
        }
        set!(
            radius,
            min_neighbors,
            voxel_size,
            ransac_threshold,
            max_iterations,
            min_inlier_fraction,
            max_planes
        );
        if let Some(s) = self.complete {
            c.complete = Some(s.into());
        }
    }
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Target frame")]
pub struct FrameFlags {
    #[arg(long, value_enum)]
    pub axes: Option<Axes>,
    /// Frame origin; the conditioned-cloud centroid otherwise.
    #[arg(long, value_parser = triple, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub origin: Option<[f64; 3]>,
}

impl FrameFlags {
    pub fn apply(&self, f: &mut FrameSection) {
        match self.axes {
            Some(Axes::Planes) => f.mode = FrameMode::Planes,
            Some(Axes::Identity) => f.mode = FrameMode::Identity,
            None => {}
        }
        if let Some(o) = &self.origin {
            f.origin = Some(*o);
        }
    }
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Scale")]
pub struct ScaleFlags {
    /// Meters per reconstruction unit.
    #[arg(long, conflicts_with = "known_length")]
    pub scale: Option<f64>,
    /// Two reconstruction points and their metric distance.
    #[arg(long, value_parser = floats::<7>, value_name = "AX,AY,AZ,BX,BY,BZ,METERS", allow_hyphen_values = true)]
    pub known_length: Option<[f64; 7]>,
}

impl ScaleFlags {
    pub fn apply(&self, s: &mut ScaleSection) {
        if let Some(c) = self.scale {
            *s = ScaleSection {
                c: Some(c),
                known_length: None,
            };
        }
        if let Some(v) = &self.known_length {
            *s = ScaleSection {
                c: None,
                known_length: Some(KnownLength {
                    a: vec3(&v[0..3]),
                    b: vec3(&v[3..6]),
                    length_m: v[6],
                }),
            };
        }
    }
}

/// Reads `--config` (relative input paths resolved against its directory)
/// or starts from defaults without an input source.
pub fn base_config(path: Option<&PathBuf>) -> anyhow::Result<PipelineConfig> {
    Ok(match path {
        Some(p) => {
            let dir = p.parent().map(PathBuf::from).unwrap_or_default();
            PipelineConfig::from_file(p)?.with_base_dir(&dir)
        }
        None => PipelineConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            simulate: None,
            reconstruction: None,
            conditioning: Default::default(),
            frame: Default::default(),
            scale: Default::default(),
        },
    })
}
