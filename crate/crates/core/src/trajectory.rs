//! Ordered camera pose sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, Rotation, Vec3};

/// Whether positions are in arbitrary reconstruction units or meters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    SfmGauge,
    Metric,
}

impl FrameTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameTag::SfmGauge => "sfm_gauge",
            FrameTag::Metric => "metric",
        }
    }
}

/// Time-ordered camera poses expressed in the target-fixed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrajectory {
    poses: Vec<Pose>,
    /// Image or frame names parallel to `poses`; empty when unknown.
    names: Vec<String>,
    pub frame_tag: FrameTag,
    pub source: String,
}

impl PoseTrajectory {
    /// Builds a trajectory; timestamps must be strictly increasing.
    pub fn new(poses: Vec<Pose>, frame_tag: FrameTag, source: impl Into<String>) -> Result<Self> {
        check_increasing(&poses)?;
        Ok(Self {
            poses,
            names: Vec::new(),
            frame_tag,
            source: source.into(),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if !names.is_empty() && names.len() != self.poses.len() {
            return Err(Error::invalid(format!(
                "{} names for {} poses",
                names.len(),
                self.poses.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.timestamp).collect()
    }

    /// Replaces every timestamp with `index / frame_rate_hz`.
    pub fn assign_timestamps(&self, frame_rate_hz: f64) -> Result<Self> {
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        let mut out = self.clone();
        for (i, p) in out.poses.iter_mut().enumerate() {
            p.timestamp = i as f64 / frame_rate_hz;
        }
        Ok(out)
    }

    /// Replaces timestamps with explicit values (one per pose).
    pub fn with_timestamps(&self, times: &[f64]) -> Result<Self> {
        if times.len() != self.poses.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} poses",
                times.len(),
                self.poses.len()
            )));
        }
        let mut poses = self.poses.clone();
        for (p, &t) in poses.iter_mut().zip(times) {
            *p = Pose::new(p.rotation, p.center, t)?;
        }
        check_increasing(&poses)?;
        Ok(Self { poses, ..self.clone() })
    }

    /// Applies a similarity `x ↦ s·G·x` to the world frame (a gauge change).
    pub fn transform_world(&self, gauge: &Rotation, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("gauge scale must be positive"));
        }
        let g_inv = gauge.inverse();
        let poses = self
            .poses
            .iter()
            .map(|p| Pose {
                rotation: p.rotation.compose(&g_inv),
                center: gauge.rotate(&p.center) * scale,
                timestamp: p.timestamp,
            })
            .collect();
        Ok(Self { poses, ..self.clone() })
    }

    /// Same poses in reverse order, re-timed as `t_last - t`.
    pub fn reversed(&self) -> Self {
        let t_end = self.poses.last().map_or(0.0, |p| p.timestamp);
        let poses = self
            .poses
            .iter()
            .rev()
            .map(|p| Pose {
                timestamp: t_end - p.timestamp,
                ..*p
            })
            .collect();
        let mut names = self.names.clone();
        names.reverse();
        Self {
            poses,
            names,
            ..self.clone()
        }
    }
}

pub fn assign_timestamps(traj: &PoseTrajectory, frame_rate_hz: f64) -> Result<PoseTrajectory> {
    traj.assign_timestamps(frame_rate_hz)
}

fn check_increasing(poses: &[Pose]) -> Result<()> {
    for (i, w) in poses.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::invalid(format!(
                "timestamps must be strictly increasing (pose {} at {} s follows {} s)",
                i + 1,
                w[1].timestamp,
                w[0].timestamp
            )));
        }
    }
    Ok(())
}

/// Convenience for tests and simulators: poses from (rotation, center, time).
pub fn trajectory_from_parts(
    parts: impl IntoIterator<Item = (Rotation, Vec3, f64)>,
    frame_tag: FrameTag,
    source: &str,
) -> Result<PoseTrajectory> {
    let poses = parts
        .into_iter()
        .map(|(r, c, t)| Pose::new(r, c, t))
        .collect::<Result<Vec<_>>>()?;
    PoseTrajectory::new(poses, frame_tag, source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_traj(n: usize) -> PoseTrajectory {
        trajectory_from_parts(
            (0..n).map(|i| (Rotation::identity(), Vec3::zeros(), i as f64)),
            FrameTag::SfmGauge,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn timestamps_from_frame_rate() {
        let t = static_traj(13);
        let at30 = t.assign_timestamps(30.0).unwrap();
        assert!((at30.poses()[3].timestamp - 0.1).abs() < 1e-15);
        assert_eq!(at30.poses()[0].timestamp, 0.0);
        let at01 = t.assign_timestamps(0.1).unwrap();
        assert!((at01.poses()[12].timestamp - 120.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_frame_rate() {
        assert!(static_traj(2).assign_timestamps(0.0).is_err());
        assert!(static_traj(2).assign_timestamps(-3.0).is_err());
    }

    #[test]
    fn rejects_non_increasing() {
        let r = trajectory_from_parts(
            [
                (Rotation::identity(), Vec3::zeros(), 1.0),
                (Rotation::identity(), Vec3::zeros(), 1.0),
            ],
            FrameTag::Metric,
            "",
        );
        assert!(r.is_err());
    }

    #[test]
    fn gauge_transform_preserves_projection() {
        let pose = Pose::new(Rotation::exp(&Vec3::new(0.1, 0.2, 0.3)), Vec3::new(1.0, 2.0, 3.0), 0.0).unwrap();
        let t = PoseTrajectory::new(vec![pose], FrameTag::Metric, "").unwrap();
        let g = Rotation::exp(&Vec3::new(-0.4, 0.9, 0.2));
        let moved = t.transform_world(&g, 1.0).unwrap();
        let x = Vec3::new(-0.3, 0.5, 4.0);
        let cam_a = pose.rotation.rotate(&(x - pose.center));
        let p = moved.poses()[0];
        let cam_b = p.rotation.rotate(&(g.rotate(&x) - p.center));
        assert!((cam_a - cam_b).norm() < 1e-12);
    }
}
