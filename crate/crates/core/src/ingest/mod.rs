//! Readers and writers for reconstruction outputs and the internal exchange
//! formats.
//!
//! * [`opensfm`]: `reconstruction.json` (plus optional `tracks.csv` and a
//!   timing sidecar).
//! * [`colmap`]: `images.txt` / `points3D.txt` text exports.
//! * [`ply`]: ASCII PLY point clouds.
//! * trajectory CSV (`time_s,qw,qx,qy,qz,cx,cy,cz`), defined here.

pub mod colmap;
pub mod opensfm;
pub mod ply;

use crate::cloud::{FeatureReport, PointCloud};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::geom::{Pose, Rotation, Vec3};
use crate::trajectory::{FrameTag, PoseTrajectory};

/// Result of parsing one reconstruction.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub trajectory: PoseTrajectory,
    pub cloud: PointCloud,
    pub features: Option<FeatureReport>,
    /// Points dropped for non-finite coordinates.
    pub dropped_points: usize,
}

pub const TRAJECTORY_CSV_HEADER: [&str; 8] = ["time_s", "qw", "qx", "qy", "qz", "cx", "cy", "cz"];

pub fn write_trajectory_csv(traj: &PoseTrajectory) -> String {
    let mut out = TRAJECTORY_CSV_HEADER.join(",");
    out.push('\n');
    for p in traj.poses() {
        let q = p.rotation.quaternion();
        let row = [p.timestamp, q[0], q[1], q[2], q[3], p.center.x, p.center.y, p.center.z];
        out.push_str(&row.map(sig9).join(","));
        out.push('\n');
    }
    out
}

pub fn read_trajectory_csv(text: &str, frame_tag: FrameTag, source: &str) -> Result<PoseTrajectory> {
    let rows = csv_rows(text, &TRAJECTORY_CSV_HEADER)?;
    let poses = rows
        .iter()
        .map(|r| {
            Pose::new(
                Rotation::from_quaternion(r[1], r[2], r[3], r[4])?,
                Vec3::new(r[5], r[6], r[7]),
                r[0],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if poses.is_empty() {
        return Err(Error::EmptyInput("trajectory CSV has no rows".into()));
    }
    PoseTrajectory::new(poses, frame_tag, source)
}

/// Parses a numeric CSV whose header must equal `header` exactly.
pub(crate) fn csv_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got = rdr
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            "line 1",
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::parse(
                format!("line {line}"),
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(format!("line {line}"), format!("invalid number `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok(rows)
}

/// Parses a timing sidecar: lines of `image_name,time_s` (an optional
/// header line starting with a non-numeric time column is skipped; `#`
/// comments are ignored). Returns times aligned with `traj.names()`.
pub fn parse_timing_sidecar(text: &str, traj: &PoseTrajectory) -> Result<Vec<f64>> {
    let mut map = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((name, t)) = line.rsplit_once(',') else {
            return Err(Error::parse(format!("line {}", i + 1), "expected `name,time_s`"));
        };
        match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => {
                map.insert(name.trim().to_string(), v);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(Error::parse(
                    format!("line {}", i + 1),
                    format!("invalid time `{}`", t.trim()),
                ))
            }
        }
    }
    traj.names()
        .iter()
        .map(|n| {
            map.get(n)
                .copied()
                .ok_or_else(|| Error::schema(format!("timing entry for image `{n}`")))
        })
        .collect()
}

/// Re-times a parsed trajectory from a sidecar and re-sorts it by time.
pub fn apply_timing_sidecar(rec: &Reconstruction, text: &str) -> Result<Reconstruction> {
    let times = parse_timing_sidecar(text, &rec.trajectory)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let poses = order
        .iter()
        .map(|&i| {
            Pose::new(
                rec.trajectory.poses()[i].rotation,
                rec.trajectory.poses()[i].center,
                times[i],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let names = order.iter().map(|&i| rec.trajectory.names()[i].clone()).collect();
    let trajectory =
        PoseTrajectory::new(poses, rec.trajectory.frame_tag, rec.trajectory.source.clone())?.with_names(names)?;
    let features = rec.features.as_ref().map(|f| retime_features(f, &trajectory));
    Ok(Reconstruction {
        trajectory,
        features,
        ..rec.clone()
    })
}

/// Re-times a parsed trajectory at a constant frame rate.
pub fn apply_frame_rate(rec: &Reconstruction, frame_rate_hz: f64) -> Result<Reconstruction> {
    let trajectory = rec.trajectory.assign_timestamps(frame_rate_hz)?;
    let features = rec.features.as_ref().map(|f| retime_features(f, &trajectory));
    Ok(Reconstruction {
        trajectory,
        features,
        ..rec.clone()
    })
}

fn retime_features(report: &FeatureReport, traj: &PoseTrajectory) -> FeatureReport {
    let mut frames = report.frames.clone();
    for f in frames.iter_mut() {
        if let Some(i) = traj.names().iter().position(|n| *n == f.frame_id) {
            f.timestamp = traj.poses()[i].timestamp;
        }
    }
    frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    FeatureReport { frames }
}

/// Builds the pose list from `(name, rotation, translation)` shots: sorted
/// lexicographically by name and stamped with the frame index in seconds
/// (re-time with a frame rate or a sidecar afterwards).
pub(crate) fn trajectory_from_shots(mut shots: Vec<(String, Rotation, Vec3)>, source: &str) -> Result<PoseTrajectory> {
    if shots.is_empty() {
        return Err(Error::EmptyInput("reconstruction has no shots".into()));
    }
    shots.sort_by(|a, b| a.0.cmp(&b.0));
    let mut names = Vec::with_capacity(shots.len());
    let mut poses = Vec::with_capacity(shots.len());
    for (i, (name, r, t)) in shots.into_iter().enumerate() {
        poses.push(Pose::from_rotation_translation(r, &t, i as f64)?);
        names.push(name);
    }
    PoseTrajectory::new(poses, FrameTag::SfmGauge, source)?.with_names(names)
}
