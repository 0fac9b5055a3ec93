//! Relative-motion estimation from the apparent camera trajectory around a
//! reconstructed target.
//!
//! The moving radius `r_t = c_t − origin` from the target origin to the
//! camera center changes length as the target approaches or recedes, and
//! rotates as the target tumbles. Its norm change gives the range rate; the
//! change in camera orientation gives the attitude increment
//! `R(Φ) = R_tᵀ·R_{t+1}` from which the body rate `log R(Φ) / Δt` follows.

mod sine;

pub use sine::{fit_sine, period_of, SineFit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::geom::{Rotation, Vec3};
use crate::pointcloud::TargetFrame;
use crate::trajectory::PoseTrajectory;

/// Per-interval angles at or beyond this are rejected as aliased.
const ALIAS_LIMIT: f64 = std::f64::consts::PI - 1e-6;
/// Displacements below this (SfM units) have no direction.
const MIN_DISPLACEMENT: f64 = 1e-12;

/// Metric scale: meters per SfM unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleReference {
    pub scale_c: f64,
    pub provenance: String,
}

impl ScaleReference {
    pub fn new(scale_c: f64, provenance: impl Into<String>) -> Result<Self> {
        if !(scale_c.is_finite() && scale_c > 0.0) {
            return Err(Error::invalid(format!(
                "scale coefficient must be positive and finite, got {scale_c}"
            )));
        }
        Ok(Self {
            scale_c,
            provenance: provenance.into(),
        })
    }

    /// c = 1, for trajectories that are already metric.
    pub fn metric() -> Self {
        Self {
            scale_c: 1.0,
            provenance: "metric input".into(),
        }
    }
}

/// Scale from a segment of known physical length measured in the
/// reconstruction.
pub fn scale_from_known_length(p_a: &Vec3, p_b: &Vec3, true_length_m: f64) -> Result<ScaleReference> {
    if !(true_length_m.is_finite() && true_length_m > 0.0) {
        return Err(Error::invalid(format!(
            "known length must be positive, got {true_length_m}"
        )));
    }
    let d = (p_a - p_b).norm();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("known-length endpoints coincide"));
    }
    ScaleReference::new(
        true_length_m / d,
        format!("known length {} m over {} SfM units", sig9(true_length_m), sig9(d)),
    )
}

pub fn radius_vectors(traj: &PoseTrajectory, origin: &Vec3) -> Vec<Vec3> {
    traj.poses().iter().map(|p| p.center - origin).collect()
}

/// Range change over one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearStep {
    /// `‖r_{t+1}‖ − ‖r_t‖`, SfM units.
    pub l: f64,
    /// `c·L/Δt`, m/s.
    pub radial_speed: f64,
    /// Unit displacement direction in reconstruction axes, or zero.
    pub direction: Vec3,
    /// `radial_speed · direction`, m/s in reconstruction axes.
    pub velocity: Vec3,
}

fn check_timestamps(traj: &PoseTrajectory) -> Result<()> {
    if traj.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 poses, got {}", traj.len())));
    }
    for (i, w) in traj.poses().windows(2).enumerate() {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(Error::invalid(format!("timestamps not increasing at interval {i}")));
        }
    }
    Ok(())
}

pub fn linear_motion(traj: &PoseTrajectory, origin: &Vec3, scale: &ScaleReference) -> Result<Vec<LinearStep>> {
    check_timestamps(traj)?;
    let r = radius_vectors(traj, origin);
    let poses = traj.poses();
    Ok((0..r.len() - 1)
        .map(|i| {
            let dt = poses[i + 1].timestamp - poses[i].timestamp;
            let l = r[i + 1].norm() - r[i].norm();
            let radial_speed = scale.scale_c * l / dt;
            let disp = r[i + 1] - r[i];
            let direction = if disp.norm() < MIN_DISPLACEMENT {
                Vec3::zeros()
            } else {
                disp.normalize()
            };
            LinearStep {
                l,
                radial_speed,
                direction,
                velocity: direction * radial_speed,
            }
        })
        .collect())
}

/// `R(Φ)_t = R_tᵀ · R_{t+1}` from the stored world-to-camera rotations.
/// Satisfies `R(Φ)⁻¹ · R_tᵀ = R_{t+1}ᵀ`.
pub fn rotation_increments(traj: &PoseTrajectory) -> Result<Vec<Rotation>> {
    if traj.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 poses, got {}", traj.len())));
    }
    Ok(traj
        .poses()
        .windows(2)
        .map(|w| w[0].rotation.inverse().compose(&w[1].rotation))
        .collect())
}

/// `log R(Φ) / Δt` per interval, in reconstruction axes. `timestamps` holds
/// one entry per pose, i.e. one more than `increments`.
pub fn angular_velocity(increments: &[Rotation], timestamps: &[f64]) -> Result<Vec<Vec3>> {
    if timestamps.len() != increments.len() + 1 {
        return Err(Error::invalid(format!(
            "{} increments need {} timestamps, got {}",
            increments.len(),
            increments.len() + 1,
            timestamps.len()
        )));
    }
    increments
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let dt = timestamps[i + 1] - timestamps[i];
            if !(dt > 0.0) {
                return Err(Error::invalid(format!("timestamps not increasing at interval {i}")));
            }
            let phi = r.log();
            let angle = phi.norm();
            if angle >= ALIAS_LIMIT {
                return Err(Error::Aliasing {
                    interval: i,
                    angle_rad: angle,
                });
            }
            Ok(phi / dt)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionRecord {
    pub t_mid: f64,
    pub dt: f64,
    /// SfM units.
    pub l: f64,
    /// m/s; negative while approaching.
    pub radial_speed: f64,
    /// m/s in target axes.
    pub velocity: Vec3,
    /// Rotation vector of the increment, rad, in target axes.
    pub phi: Vec3,
    /// rad/s in target axes.
    pub omega: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionEstimate {
    pub records: Vec<MotionRecord>,
    pub frame: TargetFrame,
    pub scale: ScaleReference,
    /// Sine fits of ω_x, ω_y, ω_z (rad/s) where one exists.
    pub fits: [Option<SineFit>; 3],
}

pub fn estimate_motion(traj: &PoseTrajectory, frame: &TargetFrame, scale: &ScaleReference) -> Result<MotionEstimate> {
    check_timestamps(traj)?;
    let linear = linear_motion(traj, &frame.origin, scale)?;
    let increments = rotation_increments(traj)?;
    let times = traj.timestamps();
    let omega = angular_velocity(&increments, &times)?;
    let records: Vec<MotionRecord> = (0..linear.len())
        .map(|i| {
            let dt = times[i + 1] - times[i];
            let w = frame.to_target(&omega[i]);
            MotionRecord {
                t_mid: 0.5 * (times[i] + times[i + 1]),
                dt,
                l: linear[i].l,
                radial_speed: linear[i].radial_speed,
                velocity: frame.to_target(&linear[i].velocity),
                phi: w * dt,
                omega: w,
            }
        })
        .collect();
    let fits = fit_components(&records);
    Ok(MotionEstimate {
        records,
        frame: *frame,
        scale: scale.clone(),
        fits,
    })
}

fn fit_components(records: &[MotionRecord]) -> [Option<SineFit>; 3] {
    let t: Vec<f64> = records.iter().map(|r| r.t_mid).collect();
    let fits: Vec<Option<SineFit>> = (0..3)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = records.iter().map(|r| r.omega[k]).collect();
            fit_sine(&t, &y).ok()
        })
        .collect();
    [fits[0], fits[1], fits[2]]
}

pub const MOTION_CSV_HEADER: [&str; 9] = [
    "t_mid_s",
    "L",
    "radial_speed_m_s",
    "vx",
    "vy",
    "vz",
    "wx_deg_s",
    "wy_deg_s",
    "wz_deg_s",
];

impl MotionEstimate {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t_mid).collect()
    }

    pub fn omega_deg_s(&self) -> Vec<Vec3> {
        self.records.iter().map(|r| r.omega.map(f64::to_degrees)).collect()
    }

    /// Rates re-expressed in the camera frame at each interval midpoint.
    /// For a static camera these are inertial axes up to the fixed camera
    /// orientation.
    pub fn omega_camera_axes(&self, traj: &PoseTrajectory) -> Result<Vec<Vec3>> {
        if traj.len() != self.records.len() + 1 {
            return Err(Error::invalid("trajectory does not match the estimate"));
        }
        let poses = traj.poses();
        Ok(self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mid = poses[i].rotation.interpolate(&poses[i + 1].rotation, 0.5);
                mid.rotate(&self.frame.axes.rotate(&r.omega))
            })
            .collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = MOTION_CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            let w = r.omega.map(f64::to_degrees);
            let row = [
                r.t_mid,
                r.l,
                r.radial_speed,
                r.velocity.x,
                r.velocity.y,
                r.velocity.z,
                w.x,
                w.y,
                w.z,
            ];
            out.push_str(&row.iter().map(|v| sig9(*v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> MotionSummary {
        let n = self.records.len();
        let speeds: Vec<f64> = self.records.iter().map(|r| r.radial_speed.abs()).collect();
        let rates: Vec<Vec3> = self.omega_deg_s();
        let comp = |k: usize| rates.iter().map(|w| w[k]).collect::<Vec<_>>();
        let fit_summary = |k: usize| {
            self.fits[k].map(|f| FitSummary {
                amplitude_deg_s: f.amplitude.to_degrees(),
                angular_frequency_rad_s: f.angular_frequency,
                phase_rad: f.phase,
                offset_deg_s: f.offset.to_degrees(),
                rmse_residual_deg_s: f.rmse_residual.to_degrees(),
                period_s: period_of(&f),
            })
        };
        MotionSummary {
            intervals: n,
            scale_c: self.scale.scale_c,
            scale_provenance: self.scale.provenance.clone(),
            speed_m_s: Stats::of(&speeds),
            radial_speed_m_s: Stats::of(&self.records.iter().map(|r| r.radial_speed).collect::<Vec<_>>()),
            angular_speed_deg_s: Stats::of(&rates.iter().map(|w| w.norm()).collect::<Vec<_>>()),
            wx_deg_s: Stats::of(&comp(0)),
            wy_deg_s: Stats::of(&comp(1)),
            wz_deg_s: Stats::of(&comp(2)),
            fit_wx: fit_summary(0),
            fit_wy: fit_summary(1),
            fit_wz: fit_summary(2),
        }
    }
}

/// Parses a motion CSV back into records (frame and fits are not stored).
pub fn read_motion_csv(text: &str) -> Result<Vec<MotionRecord>> {
    let rows = crate::ingest::csv_rows(text, &MOTION_CSV_HEADER)?;
    let mut out: Vec<MotionRecord> = Vec::with_capacity(rows.len());
    for r in rows {
        let omega = Vec3::new(r[6], r[7], r[8]).map(f64::to_radians);
        out.push(MotionRecord {
            t_mid: r[0],
            dt: f64::NAN,
            l: r[1],
            radial_speed: r[2],
            velocity: Vec3::new(r[3], r[4], r[5]),
            phi: Vec3::from_element(f64::NAN),
            omega,
        });
    }
    // Interval lengths follow from consecutive midpoints where sampling is
    // uniform; otherwise they stay unknown.
    if out.len() >= 2 {
        let d = out[1].t_mid - out[0].t_mid;
        let uniform = out
            .windows(2)
            .all(|w| ((w[1].t_mid - w[0].t_mid) - d).abs() <= 1e-9 * d.abs().max(1.0));
        if uniform {
            for r in out.iter_mut() {
                r.dt = d;
                r.phi = r.omega * d;
            }
        }
    }
    Ok(out)
}

impl MotionEstimate {
    /// Rebuilds an estimate from stored records, refitting the sinusoids.
    pub fn from_records(records: Vec<MotionRecord>, frame: TargetFrame, scale: ScaleReference) -> Self {
        let fits = fit_components(&records);
        Self {
            records,
            frame,
            scale,
            fits,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    /// Mean and population standard deviation; zeros for an empty series.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub amplitude_deg_s: f64,
    pub angular_frequency_rad_s: f64,
    pub phase_rad: f64,
    pub offset_deg_s: f64,
    pub rmse_residual_deg_s: f64,
    pub period_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSummary {
    pub intervals: usize,
    pub scale_c: f64,
    pub scale_provenance: String,
    /// |radial speed|.
    pub speed_m_s: Stats,
    pub radial_speed_m_s: Stats,
    pub angular_speed_deg_s: Stats,
    pub wx_deg_s: Stats,
    pub wy_deg_s: Stats,
    pub wz_deg_s: Stats,
    pub fit_wx: Option<FitSummary>,
    pub fit_wy: Option<FitSummary>,
    pub fit_wz: Option<FitSummary>,
}
