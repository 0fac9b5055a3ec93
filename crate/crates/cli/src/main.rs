//! `sfm-tumble`: estimate the motion of a tumbling target from an SfM
//! reconstruction, or from a simulated one, and score it against truth.
//!
//! Every subcommand writes its resolved parameters next to its outputs as
//! `effective_config.toml`.

mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use args::{base_config, ConditionFlags, FrameFlags, ReconFlags, ScaleFlags, SimFlags};
use sfm_tumble::config::{ConditioningSection, FrameMode, FrameSection, PipelineConfig};
use sfm_tumble::eval::{evaluate, series_csv, TruthSeries};
use sfm_tumble::ingest::{self, ply};
use sfm_tumble::motion::{estimate_motion, read_motion_csv, MotionEstimate, ScaleReference};
use sfm_tumble::pipeline::{
    condition_stage, frame_stage, load_reconstruction, load_simulation, planes_to_json, run_pipeline, summary_json,
    write_output,
};
use sfm_tumble::pointcloud::{ConditioningParams, TargetFrame};
use sfm_tumble::sim::{read_truth_csv, write_truth_csv, InertiaModel};
use sfm_tumble::{FrameTag, Rotation, Vec3};

#[derive(Parser, Debug)]
#[command(name = "sfm-tumble", version, about, propagate_version = true)]
struct Cli {
    /// Seed for pose noise, synthetic clouds and RANSAC.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every artifact of the run.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Simulate a tumbling box and emit trajectory, truth and point cloud.
    Simulate {
        /// Config file; its [simulate] section is the starting point.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Convert reconstruction files into trajectory CSV and PLY.
    Ingest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        recon: ReconFlags,
    },
    /// Condition a point cloud, find its planes and define the target frame.
    Pcl {
        /// ASCII or binary PLY cloud.
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        condition: ConditionFlags,
        #[command(flatten)]
        frame: FrameFlags,
    },
    /// Estimate linear and angular velocity from a trajectory.
    Estimate {
        /// Trajectory CSV as written by `ingest` or `simulate`.
        #[arg(long)]
        trajectory: PathBuf,
        /// frame.json from `pcl`; otherwise reconstruction axes at --origin.
        #[arg(long)]
        frame_file: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        frame: FrameFlags,
        #[command(flatten)]
        scale: ScaleFlags,
    },
    /// Score a motion estimate against ground truth.
    Evaluate {
        /// motion.csv from `estimate`.
        #[arg(long)]
        motion: PathBuf,
        /// Truth CSV from `simulate`.
        #[arg(long)]
        truth: PathBuf,
        /// frame.json the estimate is expressed in; body axes otherwise.
        #[arg(long)]
        frame_file: Option<PathBuf>,
        /// Principal moments for resampling truth by integration; cubic
        /// interpolation otherwise.
        #[arg(long, value_parser = args::triple, value_name = "IXX,IYY,IZZ")]
        inertia: Option<[f64; 3]>,
    },
    /// Run every stage from a config file.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the simulator even when the config has no [simulate] section.
        #[arg(long, conflicts_with_all = ["format", "input"])]
        simulate: bool,
        #[command(flatten)]
        sim: SimFlags,
        #[command(flatten)]
        recon: ReconFlags,
        #[command(flatten)]
        condition: ConditionFlags,
        #[command(flatten)]
        frame: FrameFlags,
        #[command(flatten)]
        scale: ScaleFlags,
    },
}

/// Applies the global flags over the config file.
fn globals(cli: &Cli, mut cfg: PipelineConfig) -> PipelineConfig {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    let path = write_output(dir, name, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_params<T: Serialize>(dir: &Path, params: &T) -> anyhow::Result<()> {
    write(dir, "effective_config.toml", toml::to_string(params)?)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn simulate_cmd(cli: &Cli, config: Option<&PathBuf>, sim: &SimFlags) -> anyhow::Result<()> {
    let mut cfg = globals(cli, base_config(config)?);
    if cfg.reconstruction.is_some() {
        bail!("the config describes a reconstruction, not a simulation");
    }
    let mut section = cfg.simulate.take().unwrap_or_default();
    sim.apply(&mut section);
    let inputs = load_simulation(&section, cfg.seed)?;
    let dir = &cfg.output_dir;
    write(dir, "trajectory.csv", ingest::write_trajectory_csv(&inputs.trajectory))?;
    let truth = inputs.truth.as_ref().expect("simulation has truth");
    write(dir, "truth.csv", write_truth_csv(truth.states())?)?;
    write(dir, "cloud.ply", ply::write_ply(&inputs.cloud))?;
    cfg.simulate = Some(section);
    write_params(dir, &cfg)
}

fn ingest_cmd(cli: &Cli, config: Option<&PathBuf>, recon: &ReconFlags) -> anyhow::Result<()> {
    let mut cfg = globals(cli, base_config(config)?);
    if cfg.simulate.is_some() {
        bail!("the config describes a simulation, not a reconstruction");
    }
    let section = recon.apply(cfg.reconstruction.take())?;
    let inputs = load_reconstruction(&section)?;
    let dir = &cfg.output_dir;
    write(dir, "trajectory.csv", ingest::write_trajectory_csv(&inputs.trajectory))?;
    write(dir, "cloud.ply", ply::write_ply(&inputs.cloud))?;
    if let Some(f) = &inputs.features {
        write(dir, "features.csv", f.to_csv())?;
    }
    println!(
        "{} poses over {:.3} s, {} points",
        inputs.trajectory.len(),
        inputs.trajectory.timestamps().last().copied().unwrap_or(0.0),
        inputs.cloud.len()
    );
    cfg.reconstruction = Some(section);
    write_params(dir, &cfg)
}

#[derive(Serialize)]
struct PclParams<'a> {
    seed: u64,
    output_dir: &'a Path,
    cloud: &'a Path,
    conditioning: ConditioningSection,
    frame: &'a FrameSection,
}

fn pcl_cmd(
    cli: &Cli,
    cloud: &Path,
    config: Option<&PathBuf>,
    condition: &ConditionFlags,
    frame: &FrameFlags,
) -> anyhow::Result<()> {
    let mut cfg = globals(cli, base_config(config)?);
    condition.apply(&mut cfg.conditioning);
    frame.apply(&mut cfg.frame);
    let bytes = std::fs::read(cloud).with_context(|| format!("reading {}", cloud.display()))?;
    let input = ply::read_ply(&bytes).with_context(|| format!("parsing {}", cloud.display()))?;
    let (out, params) = condition_stage(&input, &cfg.conditioning, cfg.seed)?;
    let target = frame_stage(&out.cloud, &out.planes, &cfg.frame)?;
    let dir = &cfg.output_dir;
    write(dir, "cloud_conditioned.ply", ply::write_ply(&out.cloud))?;
    write(dir, "planes.json", planes_to_json(&out.planes))?;
    write(dir, "frame.json", target.to_json())?;
    println!(
        "{} -> {} points, {} outliers removed, {} planes",
        input.len(),
        out.cloud.len(),
        out.removed_outliers,
        out.planes.len()
    );
    write_params(
        dir,
        &PclParams {
            seed: cfg.seed,
            output_dir: dir,
            cloud,
            conditioning: resolved(&params, &cfg.conditioning),
            frame: &cfg.frame,
        },
    )
}

fn resolved(params: &ConditioningParams, section: &ConditioningSection) -> ConditioningSection {
    ConditioningSection::from_params(params, section.complete)
}

#[derive(Serialize)]
struct EstimateParams<'a> {
    output_dir: &'a Path,
    trajectory: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame_file: Option<&'a Path>,
    frame: FrameJsonLike,
    scale_c: f64,
    scale_provenance: &'a str,
}

#[derive(Serialize)]
struct FrameJsonLike {
    origin: [f64; 3],
    /// Rows are the target axes in reconstruction coordinates.
    axes: [[f64; 3]; 3],
}

impl From<&TargetFrame> for FrameJsonLike {
    fn from(f: &TargetFrame) -> Self {
        let m = f.axes.matrix();
        Self {
            origin: f.origin.into(),
            axes: [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]]),
        }
    }
}

fn load_frame(path: &Path) -> anyhow::Result<TargetFrame> {
    TargetFrame::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn estimate_cmd(
    cli: &Cli,
    trajectory: &Path,
    frame_file: Option<&Path>,
    config: Option<&PathBuf>,
    frame: &FrameFlags,
    scale: &ScaleFlags,
) -> anyhow::Result<()> {
    let mut cfg = globals(cli, base_config(config)?);
    scale.apply(&mut cfg.scale);
    let scale_ref = cfg.scale.resolve()?;
    let traj = ingest::read_trajectory_csv(&read_text(trajectory)?, FrameTag::SfmGauge, "trajectory csv")
        .with_context(|| format!("parsing {}", trajectory.display()))?;
    frame.apply(&mut cfg.frame);
    let origin = cfg.frame.origin.map(Vec3::from);
    let target = match frame_file {
        Some(p) => {
            let mut f = load_frame(p)?;
            if let Some(o) = origin {
                f.origin = o;
            }
            f
        }
        None if cfg.frame.mode == FrameMode::Planes && frame.axes.is_some() => {
            bail!("plane-based axes need --frame-file (run `pcl` first)")
        }
        None => TargetFrame {
            origin: origin.unwrap_or_else(Vec3::zeros),
            axes: Rotation::identity(),
        },
    };
    let est = estimate_motion(&traj, &target, &scale_ref)?;
    let dir = &cfg.output_dir;
    write(dir, "motion.csv", est.to_csv())?;
    write(dir, "motion_summary.json", summary_json(&est))?;
    let s = est.summary();
    println!(
        "{} intervals, speed {:.6} m/s, |w| {:.6} deg/s",
        est.records.len(),
        s.speed_m_s.mean,
        s.angular_speed_deg_s.mean
    );
    write_params(
        dir,
        &EstimateParams {
            output_dir: dir,
            trajectory,
            frame_file,
            frame: (&target).into(),
            scale_c: scale_ref.scale_c,
            scale_provenance: &scale_ref.provenance,
        },
    )
}

#[derive(Serialize)]
struct EvaluateParams<'a> {
    output_dir: &'a Path,
    motion: &'a Path,
    truth: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame_file: Option<&'a Path>,
    truth_resampling: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    inertia_kg_m2: Option<[f64; 3]>,
}

fn evaluate_cmd(
    cli: &Cli,
    motion: &Path,
    truth: &Path,
    frame_file: Option<&Path>,
    inertia: Option<[f64; 3]>,
) -> anyhow::Result<()> {
    let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let records = read_motion_csv(&read_text(motion)?).with_context(|| format!("parsing {}", motion.display()))?;
    let states = read_truth_csv(&read_text(truth)?).with_context(|| format!("parsing {}", truth.display()))?;
    let moments = inertia;
    let model = moments.map(|[a, b, c]| InertiaModel::new(a, b, c)).transpose()?;
    let series = TruthSeries::new(states, model)?;
    let frame = match frame_file {
        Some(p) => load_frame(p)?,
        None => TargetFrame::identity(),
    };
    let body_to_target = frame.axes.inverse();
    let est = MotionEstimate::from_records(records, frame, ScaleReference::metric());
    let report = evaluate(&est, &series, &body_to_target)?;
    write(&dir, "eval.json", report.to_json())?;
    write(&dir, "eval_series.csv", series_csv(&est, &series, &body_to_target)?)?;
    let r = report.omega_rmse_deg_s;
    println!(
        "w RMSE x {:.3e} y {:.3e} z {:.3e} deg/s, speed RMSE {:.3e} m/s",
        r.x, r.y, r.z, report.speed_rmse_m_s
    );
    write_params(
        &dir,
        &EvaluateParams {
            output_dir: &dir,
            motion,
            truth,
            frame_file,
            truth_resampling: if moments.is_some() { "rk4" } else { "cubic" },
            inertia_kg_m2: moments,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn pipeline_cmd(
    cli: &Cli,
    config: Option<&PathBuf>,
    simulate: bool,
    sim: &SimFlags,
    recon: &ReconFlags,
    condition: &ConditionFlags,
    frame: &FrameFlags,
    scale: &ScaleFlags,
) -> anyhow::Result<()> {
    let mut cfg = globals(cli, base_config(config)?);
    if recon.is_set() || cfg.reconstruction.is_some() && !simulate {
        if cfg.simulate.is_some() {
            bail!("reconstruction flags given but the config has a [simulate] section");
        }
        cfg.reconstruction = Some(recon.apply(cfg.reconstruction.take())?);
    } else {
        cfg.reconstruction = None;
        let mut s = cfg.simulate.take().unwrap_or_default();
        sim.apply(&mut s);
        cfg.simulate = Some(s);
    }
    condition.apply(&mut cfg.conditioning);
    frame.apply(&mut cfg.frame);
    scale.apply(&mut cfg.scale);
    cfg.validate()?;
    let out = run_pipeline(&cfg)?;
    for p in &out.outputs {
        println!("wrote {}", p.display());
    }
    let s = out.estimate.summary();
    println!(
        "{} intervals, speed {:.6} m/s, |w| {:.6} deg/s",
        out.estimate.records.len(),
        s.speed_m_s.mean,
        s.angular_speed_deg_s.mean
    );
    if let Some(r) = &out.report {
        let w = r.omega_rmse_deg_s;
        println!("w RMSE x {:.3e} y {:.3e} z {:.3e} deg/s", w.x, w.y, w.z);
    }
    println!("runtime {:.3} s", out.runtime.as_secs_f64());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate { config, sim } => simulate_cmd(cli, config.as_ref(), sim),
        Command::Ingest { config, recon } => ingest_cmd(cli, config.as_ref(), recon),
        Command::Pcl {
            cloud,
            config,
            condition,
            frame,
        } => pcl_cmd(cli, cloud, config.as_ref(), condition, frame),
        Command::Estimate {
            trajectory,
            frame_file,
            config,
            frame,
            scale,
        } => estimate_cmd(cli, trajectory, frame_file.as_deref(), config.as_ref(), frame, scale),
        Command::Evaluate {
            motion,
            truth,
            frame_file,
            inertia,
        } => evaluate_cmd(cli, motion, truth, frame_file.as_deref(), *inertia),
        Command::Pipeline {
            config,
            simulate,
            sim,
            recon,
            condition,
            frame,
            scale,
        } => pipeline_cmd(cli, config.as_ref(), *simulate, sim, recon, condition, frame, scale),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
