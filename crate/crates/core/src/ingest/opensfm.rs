//! OpenSfM `reconstruction.json` reader.
//!
//! Accepted subset (everything else is ignored):
//!
//! ```text
//! [                                   top level: array of reconstructions
//!   {
//!     "cameras": { <id>: {...} },     required, contents unused
//!     "shots": {                      required
//!       <image name>: {
//!         "rotation":    [rx, ry, rz] required, axis-angle of world-to-camera R
//!         "translation": [tx, ty, tz] required, x_cam = R·x_world + t
//!         "feature_count": n          optional extension, observations in the shot
//!       }
//!     },
//!     "points": {                     required (may be empty)
//!       <id>: {
//!         "coordinates": [x, y, z]    required
//!         "color": [r, g, b]          optional, 0..255
//!       }
//!     }
//!   }
//! ]
//! ```
//!
//! Only the reconstruction with the most shots is used. Shots are ordered by
//! image name and stamped with their index; camera centers are `c = -Rᵀ·t`.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{trajectory_from_shots, Reconstruction};
use crate::cloud::{FeatureReport, FrameFeatures, PointCloud};
use crate::error::{Error, Result};
use crate::geom::{Rotation, Vec3};

pub fn parse_reconstruction_json(bytes: &[u8]) -> Result<Reconstruction> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
    let recs = root
        .as_array()
        .ok_or_else(|| Error::schema("<root> (array of reconstructions)"))?;
    if recs.is_empty() {
        return Err(Error::EmptyInput("file contains no reconstructions".into()));
    }

    let mut best: Option<(usize, &Map<String, Value>)> = None;
    for (i, rec) in recs.iter().enumerate() {
        let obj = rec
            .as_object()
            .ok_or_else(|| Error::schema(format!("[{i}] (object)")))?;
        for key in ["cameras", "shots", "points"] {
            if !obj.get(key).is_some_and(Value::is_object) {
                return Err(Error::schema(format!("[{i}].{key}")));
            }
        }
        let n = obj["shots"].as_object().map_or(0, Map::len);
        if best.is_none_or(|(m, _)| n > m) {
            best = Some((n, obj));
        }
    }
    let (_, rec) = best.expect("non-empty");
    let shots_obj = rec["shots"].as_object().expect("checked");
    let points_obj = rec["points"].as_object().expect("checked");

    let mut shots = Vec::with_capacity(shots_obj.len());
    let mut counts = BTreeMap::new();
    for (name, shot) in shots_obj {
        let ctx = format!("shots[\"{name}\"]");
        let rot = vec3_field(shot, "rotation", &ctx)?;
        let t = vec3_field(shot, "translation", &ctx)?;
        if let Some(c) = shot.get("feature_count") {
            let c = c
                .as_u64()
                .ok_or_else(|| Error::schema(format!("{ctx}.feature_count")))?;
            counts.insert(name.clone(), c);
        }
        shots.push((name.clone(), Rotation::exp(&rot), t));
    }
    let trajectory = trajectory_from_shots(shots, "opensfm")?;

    let mut pts = Vec::with_capacity(points_obj.len());
    let mut colors = Vec::with_capacity(points_obj.len());
    let mut all_colored = true;
    // Stable order by point id (numeric ids sort numerically).
    let mut ids: Vec<&String> = points_obj.keys().collect();
    ids.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    });
    for id in ids {
        let p = &points_obj[id];
        let ctx = format!("points[\"{id}\"]");
        let xyz = raw_vec3(p, "coordinates", &ctx)?;
        pts.push(xyz);
        match p.get("color") {
            Some(c) => colors.push(color(c, &format!("{ctx}.color"))?),
            None => {
                all_colored = false;
                colors.push([0, 0, 0]);
            }
        }
    }
    let mut cloud = PointCloud::new(pts);
    if all_colored && !cloud.is_empty() {
        cloud = cloud.with_colors(colors)?;
    }
    let dropped_points = cloud.retain_finite();

    let features = (!counts.is_empty()).then(|| FeatureReport {
        frames: trajectory
            .names()
            .iter()
            .zip(trajectory.poses())
            .filter_map(|(n, p)| {
                counts.get(n).map(|&count| FrameFeatures {
                    frame_id: n.clone(),
                    timestamp: p.timestamp,
                    count,
                })
            })
            .collect(),
    });

    Ok(Reconstruction {
        trajectory,
        cloud,
        features,
        dropped_points,
    })
}

/// Builds a feature report from an OpenSfM `tracks.csv` (tab separated,
/// first column image name), counting observations per image of `rec`.
pub fn feature_report_from_tracks(rec: &Reconstruction, tracks: &[u8]) -> Result<FeatureReport> {
    let text = std::str::from_utf8(tracks)
        .map_err(|e| Error::parse(format!("byte {}", e.valid_up_to()), "tracks file is not UTF-8"))?;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with("OPENSFM_TRACKS_VERSION") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 5 {
            return Err(Error::parse(
                format!("line {}", i + 1),
                format!("expected at least 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        *counts.entry(fields[0]).or_default() += 1;
    }
    let traj = &rec.trajectory;
    Ok(FeatureReport {
        frames: traj
            .names()
            .iter()
            .zip(traj.poses())
            .map(|(n, p)| FrameFeatures {
                frame_id: n.clone(),
                timestamp: p.timestamp,
                count: counts.get(n.as_str()).copied().unwrap_or(0),
            })
            .collect(),
    })
}

fn json_error(bytes: &[u8], e: &serde_json::Error) -> Error {
    // serde_json reports 1-based line and column; convert to a byte offset.
    let (line, col) = (e.line(), e.column());
    let mut offset = 0usize;
    if line > 0 {
        let mut current = 1;
        for (i, &b) in bytes.iter().enumerate() {
            if current == line {
                offset = i;
                break;
            }
            if b == b'\n' {
                current += 1;
                offset = i + 1;
            }
        }
        offset = (offset + col.saturating_sub(1)).min(bytes.len());
    }
    Error::parse(format!("byte {offset} (line {line}, column {col})"), e.to_string())
}

fn raw_vec3(v: &Value, key: &str, ctx: &str) -> Result<Vec3> {
    let field = || Error::schema(format!("{ctx}.{key}"));
    let arr = v.get(key).and_then(Value::as_array).ok_or_else(field)?;
    if arr.len() != 3 {
        return Err(field());
    }
    let c: Vec<f64> = arr.iter().map(Value::as_f64).collect::<Option<_>>().ok_or_else(field)?;
    Ok(Vec3::new(c[0], c[1], c[2]))
}

fn vec3_field(v: &Value, key: &str, ctx: &str) -> Result<Vec3> {
    let out = raw_vec3(v, key, ctx)?;
    if !crate::geom::is_finite(&out) {
        return Err(Error::schema(format!("{ctx}.{key}")));
    }
    Ok(out)
}

fn color(v: &Value, ctx: &str) -> Result<[u8; 3]> {
    let field = || Error::schema(ctx.to_string());
    let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(field)?;
    let mut out = [0u8; 3];
    for (o, c) in out.iter_mut().zip(arr) {
        let x = c.as_f64().filter(|x| (0.0..=255.0).contains(x)).ok_or_else(field)?;
        *o = x.round() as u8;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"[
      {
        "cameras": {"v2 sony 1920 1080 perspective 0.85": {"projection_type": "perspective"}},
        "shots": {
          "frame_0002.jpg": {"rotation": [0.0, 0.0, 1.5707963267948966], "translation": [1.0, 2.0, 3.0], "camera": "c"},
          "frame_0001.jpg": {"rotation": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, -5.0], "camera": "c"}
        },
        "points": {
          "10": {"coordinates": [0.5, 0.5, 0.5], "color": [255.0, 0.0, 12.0]},
          "2": {"coordinates": [-1.0, 0.0, 2.0], "color": [1, 2, 3]},
          "7": {"coordinates": [0.0, 1.0, 0.0], "color": [9, 9, 9]}
        }
      }
    ]"#;

    #[test]
    fn parses_minimal_fixture() {
        let rec = parse_reconstruction_json(MINIMAL.as_bytes()).unwrap();
        let t = &rec.trajectory;
        assert_eq!(t.len(), 2);
        assert_eq!(t.names(), ["frame_0001.jpg", "frame_0002.jpg"]);
        // Identity rotation with t = (0,0,-5) puts the camera at (0,0,5).
        assert!((t.poses()[0].center - Vec3::new(0.0, 0.0, 5.0)).norm() < 1e-12);
        // Rz(90°)ᵀ·(1,2,3) = (2,-1,3), so c = (-2, 1, -3).
        assert!((t.poses()[1].center - Vec3::new(-2.0, 1.0, -3.0)).norm() < 1e-12);
        assert_eq!(rec.cloud.len(), 3);
        assert_eq!(rec.cloud.points[0], Vec3::new(-1.0, 0.0, 2.0));
        assert_eq!(rec.cloud.colors.as_ref().unwrap()[2], [255, 0, 12]);
        assert!(rec.features.is_none());
    }

    #[test]
    fn empty_points_is_empty_cloud() {
        let s = r#"[{"cameras": {}, "shots": {"a.jpg": {"rotation": [0,0,0], "translation": [0,0,0]}}, "points": {}}]"#;
        let rec = parse_reconstruction_json(s.as_bytes()).unwrap();
        assert!(rec.cloud.is_empty());
        assert_eq!(rec.trajectory.len(), 1);
    }

    #[test]
    fn picks_largest_reconstruction() {
        let s = r#"[
          {"cameras": {}, "shots": {"a.jpg": {"rotation": [0,0,0], "translation": [0,0,0]}}, "points": {}},
          {"cameras": {}, "shots": {
              "b.jpg": {"rotation": [0,0,0], "translation": [1,0,0]},
              "c.jpg": {"rotation": [0,0,0], "translation": [2,0,0], "feature_count": 17}}, "points": {}}
        ]"#;
        let rec = parse_reconstruction_json(s.as_bytes()).unwrap();
        assert_eq!(rec.trajectory.names(), ["b.jpg", "c.jpg"]);
        let f = rec.features.unwrap();
        assert_eq!(f.frames.len(), 1);
        assert_eq!(f.frames[0].count, 17);
    }

    #[test]
    fn errors_are_structured() {
        let err = parse_reconstruction_json(b"[{\"cameras\": {},, }]").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("byte 16"), "{location}"),
            e => panic!("unexpected {e}"),
        }
        let err = parse_reconstruction_json(br#"[{"cameras": {}, "points": {}}]"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { field } if field == "[0].shots"), "{err}");
        let err = parse_reconstruction_json(br#"[{"cameras": {}, "shots": {"a": {"rotation": [0,0]}}, "points": {}}]"#)
            .unwrap_err();
        assert!(
            matches!(&err, Error::Schema { field } if field == "shots[\"a\"].rotation"),
            "{err}"
        );
        let err = parse_reconstruction_json(br#"[{"cameras": {}, "shots": {}, "points": {}}]"#).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
        assert!(matches!(parse_reconstruction_json(b"[]"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn tracks_sidecar_counts_observations() {
        let rec = parse_reconstruction_json(MINIMAL.as_bytes()).unwrap();
        let tracks = "OPENSFM_TRACKS_VERSION_v2\n\
            frame_0001.jpg\t0\t0\t0.1\t0.2\t0.01\t255\t0\t0\t-1\t-1\n\
            frame_0001.jpg\t1\t3\t0.1\t0.2\t0.01\t255\t0\t0\t-1\t-1\n\
            frame_0002.jpg\t0\t5\t0.1\t0.2\t0.01\t255\t0\t0\t-1\t-1\n";
        let f = feature_report_from_tracks(&rec, tracks.as_bytes()).unwrap();
        let counts: Vec<u64> = f.frames.iter().map(|f| f.count).collect();
        assert_eq!(counts, [2, 1]);
    }

    #[test]
    fn timing_sidecar_reorders() {
        let rec = parse_reconstruction_json(MINIMAL.as_bytes()).unwrap();
        let timed =
            super::super::apply_timing_sidecar(&rec, "image,time_s\nframe_0001.jpg,4.0\nframe_0002.jpg,1.5\n").unwrap();
        assert_eq!(timed.trajectory.names(), ["frame_0002.jpg", "frame_0001.jpg"]);
        assert_eq!(timed.trajectory.timestamps(), [1.5, 4.0]);
        assert!(super::super::apply_timing_sidecar(&rec, "frame_0001.jpg,4.0\n").is_err());
    }
}
