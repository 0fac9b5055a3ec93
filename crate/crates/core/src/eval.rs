//! Comparison of motion estimates against simulator ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::geom::{Rotation, Vec3};
use crate::motion::{fit_sine, period_of, MotionEstimate};
use crate::sim::{rk4_step, InertiaModel, RigidBodyState};

/// Largest RK4 step used when resampling truth between stored states.
const RESAMPLE_DT: f64 = 0.1;
/// Slack for evaluating truth marginally outside the stored span.
const TIME_SLACK: f64 = 1e-9;

pub fn rmse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("rmse of an empty series".into()));
    }
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} vs {}",
            estimates.len(),
            truth.len()
        )));
    }
    let sse: f64 = estimates.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    Ok((sse / estimates.len() as f64).sqrt())
}

/// `100·|fit − true| / true`, percent.
pub fn period_relative_error(fit_period: f64, true_period: f64) -> Result<f64> {
    if !(true_period > 0.0) {
        return Err(Error::invalid(format!(
            "true period must be positive, got {true_period}"
        )));
    }
    Ok(100.0 * (fit_period - true_period).abs() / true_period)
}

/// Sampled ground truth that can be evaluated between samples.
#[derive(Clone, Debug)]
pub struct TruthSeries {
    states: Vec<RigidBodyState>,
    inertia: Option<InertiaModel>,
}

impl TruthSeries {
    /// With `inertia`, ω between samples comes from RK4 integration out of the
    /// preceding sample; without it, from cubic interpolation.
    pub fn new(states: Vec<RigidBodyState>, inertia: Option<InertiaModel>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyInput("no truth states".into()));
        }
        if states.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::invalid("truth times must be strictly increasing"));
        }
        Ok(Self { states, inertia })
    }

    pub fn states(&self) -> &[RigidBodyState] {
        &self.states
    }

    /// Index `k` with `t_k ≤ t ≤ t_{k+1}` (clamped to the last interval).
    fn bracket(&self, t: f64) -> Result<usize> {
        let (first, last) = (self.states[0].time, self.states[self.states.len() - 1].time);
        let slack = TIME_SLACK * (last - first).abs().max(1.0);
        if !(t >= first - slack && t <= last + slack) {
            return Err(Error::invalid(format!("time {t} outside truth span [{first}, {last}]")));
        }
        if self.states.len() == 1 {
            return Ok(0);
        }
        let k = self.states.partition_point(|s| s.time <= t);
        Ok(k.saturating_sub(1).min(self.states.len() - 2))
    }

    pub fn attitude_at(&self, t: f64) -> Result<Rotation> {
        let k = self.bracket(t)?;
        if self.states.len() == 1 {
            return Ok(self.states[0].attitude);
        }
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let s = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
        Ok(a.attitude.interpolate(&b.attitude, s))
    }

    /// Body-frame angular velocity at `t`.
    pub fn omega_at(&self, t: f64) -> Result<Vec3> {
        let k = self.bracket(t)?;
        if self.states.len() == 1 {
            return Ok(self.states[0].omega);
        }
        let base = &self.states[k];
        let h = t - base.time;
        if h <= 0.0 {
            return Ok(base.omega);
        }
        match &self.inertia {
            Some(inertia) => {
                let steps = (h / RESAMPLE_DT).ceil().max(1.0) as usize;
                let dt = h / steps as f64;
                let mut s = *base;
                for _ in 0..steps {
                    s = rk4_step(&s, inertia, dt)?;
                }
                Ok(s.omega)
            }
            None => Ok(self.cubic_omega(k, t)),
        }
    }

    fn cubic_omega(&self, k: usize, t: f64) -> Vec3 {
        let n = self.states.len();
        let (p1, p2) = (&self.states[k], &self.states[k + 1]);
        let h = p2.time - p1.time;
        let s = (t - p1.time) / h;
        // Catmull-Rom tangents, one-sided at the ends.
        let tangent = |i: usize| -> Vec3 {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            (self.states[hi].omega - self.states[lo].omega) / (self.states[hi].time - self.states[lo].time)
        };
        let (m1, m2) = (tangent(k) * h, tangent(k + 1) * h);
        let (s2, s3) = (s * s, s * s * s);
        p1.omega * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m1 * (s3 - 2.0 * s2 + s)
            + p2.omega * (-2.0 * s3 + 3.0 * s2)
            + m2 * (s3 - s2)
    }

    pub fn velocity_at(&self, t: f64) -> Result<Vec3> {
        let k = self.bracket(t)?;
        if self.states.len() == 1 {
            return Ok(self.states[0].velocity);
        }
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let s = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
        Ok(a.velocity * (1.0 - s) + b.velocity * s)
    }

    /// Mean body rate over `[t0, t1]`: `log(A(t0)ᵀ·A(t1)) / (t1 − t0)`.
    pub fn interval_rate(&self, t0: f64, t1: f64) -> Result<Vec3> {
        let a0 = self.attitude_at(t0)?;
        let a1 = self.attitude_at(t1)?;
        Ok(a0.inverse().compose(&a1).log() / (t1 - t0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub estimate: f64,
    pub truth: f64,
    pub relative_error_pct: f64,
}

impl Comparison {
    fn new(estimate: f64, truth: f64) -> Self {
        let relative_error_pct = if truth != 0.0 {
            100.0 * (estimate - truth).abs() / truth.abs()
        } else {
            f64::NAN
        };
        Self {
            estimate,
            truth,
            relative_error_pct,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisValues {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for AxisValues {
    fn from(v: [f64; 3]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            z: v[2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisPeriods {
    pub x: Option<Comparison>,
    pub y: Option<Comparison>,
    pub z: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub intervals: usize,
    pub truth_samples: usize,
    /// Against the true mean rate over each interval.
    pub omega_rmse_deg_s: AxisValues,
    /// Against the instantaneous true rate at each interval midpoint.
    pub omega_midpoint_rmse_deg_s: AxisValues,
    /// |radial speed| against the true speed at each midpoint.
    pub speed_rmse_m_s: f64,
    pub mean_speed_m_s: Comparison,
    pub mean_angular_speed_deg_s: Comparison,
    /// Fitted periods, only where both the estimate and the truth admit a fit.
    pub period_s: AxisPeriods,
}

/// Truth at each interval: mean rate and midpoint rate (target axes) and
/// midpoint speed.
fn references(
    estimate: &MotionEstimate,
    truth: &TruthSeries,
    body_to_target: &Rotation,
) -> Result<(Vec<Vec3>, Vec<Vec3>, Vec<f64>)> {
    let recs = &estimate.records;
    if recs.is_empty() {
        return Err(Error::EmptyInput("estimate has no intervals".into()));
    }
    let mut mean_truth = Vec::with_capacity(recs.len());
    let mut mid_truth = Vec::with_capacity(recs.len());
    let mut speed_truth = Vec::with_capacity(recs.len());
    for (i, r) in recs.iter().enumerate() {
        if !(r.dt.is_finite() && r.dt > 0.0) {
            return Err(Error::invalid(format!("interval {i} has no valid duration")));
        }
        let (t0, t1) = (r.t_mid - 0.5 * r.dt, r.t_mid + 0.5 * r.dt);
        mean_truth.push(body_to_target.rotate(&truth.interval_rate(t0, t1)?));
        mid_truth.push(body_to_target.rotate(&truth.omega_at(r.t_mid)?));
        speed_truth.push(truth.velocity_at(r.t_mid)?.norm());
    }
    Ok((mean_truth, mid_truth, speed_truth))
}

pub const SERIES_CSV_HEADER: &str = "t_mid_s,speed_m_s,speed_true_m_s,\
wx_deg_s,wy_deg_s,wz_deg_s,\
wx_true_deg_s,wy_true_deg_s,wz_true_deg_s,\
wx_mid_true_deg_s,wy_mid_true_deg_s,wz_mid_true_deg_s";

/// Plot-ready rows of estimate and truth per interval, same axes and units
/// as the report.
pub fn series_csv(estimate: &MotionEstimate, truth: &TruthSeries, body_to_target: &Rotation) -> Result<String> {
    let (mean_truth, mid_truth, speed_truth) = references(estimate, truth, body_to_target)?;
    let mut out = String::from(SERIES_CSV_HEADER);
    out.push('\n');
    for (i, r) in estimate.records.iter().enumerate() {
        let mut row = vec![r.t_mid, r.radial_speed.abs(), speed_truth[i]];
        for v in [&r.omega, &mean_truth[i], &mid_truth[i]] {
            row.extend(v.iter().map(|x| x.to_degrees()));
        }
        out.push_str(&row.into_iter().map(sig9).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Compares `estimate` with `truth`. `body_to_target` maps body-frame
/// vectors into the target axes the estimate is expressed in.
pub fn evaluate(estimate: &MotionEstimate, truth: &TruthSeries, body_to_target: &Rotation) -> Result<EvalReport> {
    let recs = &estimate.records;
    let (mean_truth, mid_truth, speed_truth) = references(estimate, truth, body_to_target)?;
    let deg = |v: &Vec3, k: usize| v[k].to_degrees();
    let axis_rmse = |reference: &[Vec3]| -> Result<AxisValues> {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let e: Vec<f64> = recs.iter().map(|r| deg(&r.omega, k)).collect();
            let t: Vec<f64> = reference.iter().map(|v| deg(v, k)).collect();
            *o = rmse(&e, &t)?;
        }
        Ok(out.into())
    };
    let speeds: Vec<f64> = recs.iter().map(|r| r.radial_speed.abs()).collect();
    let n = recs.len() as f64;

    let times: Vec<f64> = recs.iter().map(|r| r.t_mid).collect();
    let period = |k: usize| -> Option<Comparison> {
        let est = estimate.fits[k]?;
        let y: Vec<f64> = mean_truth.iter().map(|v| v[k]).collect();
        let tru = fit_sine(&times, &y).ok()?;
        let (pe, pt) = (period_of(&est), period_of(&tru));
        Some(Comparison::new(pe, pt))
    };

    Ok(EvalReport {
        intervals: recs.len(),
        truth_samples: truth.states.len(),
        omega_rmse_deg_s: axis_rmse(&mean_truth)?,
        omega_midpoint_rmse_deg_s: axis_rmse(&mid_truth)?,
        speed_rmse_m_s: rmse(&speeds, &speed_truth)?,
        mean_speed_m_s: Comparison::new(speeds.iter().sum::<f64>() / n, speed_truth.iter().sum::<f64>() / n),
        mean_angular_speed_deg_s: Comparison::new(
            recs.iter().map(|r| r.omega.norm().to_degrees()).sum::<f64>() / n,
            mean_truth.iter().map(|v| v.norm().to_degrees()).sum::<f64>() / n,
        ),
        period_s: AxisPeriods {
            x: period(0),
            y: period(1),
            z: period(2),
        },
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
