//! COLMAP text export reader (`images.txt` + `points3D.txt`).
//!
//! `images.txt`: lines starting with `#` are comments. Each image occupies
//! two lines:
//!
//! ```text
//! IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME
//! X Y POINT3D_ID  X Y POINT3D_ID  ...        (may be empty)
//! ```
//!
//! The quaternion is world-to-camera and `x_cam = R·x_world + t`.
//!
//! `points3D.txt`: one point per line,
//! `POINT3D_ID X Y Z R G B ERROR (IMAGE_ID POINT2D_IDX)*`.

use super::{trajectory_from_shots, Reconstruction};
use crate::cloud::{FeatureReport, FrameFeatures, PointCloud};
use crate::error::{Error, Result};
use crate::geom::{Rotation, Vec3};

pub fn parse_colmap_text(images_text: &[u8], points3d_text: &[u8]) -> Result<Reconstruction> {
    let images = utf8(images_text, "images.txt")?;
    let points = utf8(points3d_text, "points3D.txt")?;

    // Data lines with their 1-based line numbers. Only comments are skipped:
    // an empty observation line is meaningful.
    let mut lines = images
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i + 1, l))
        .peekable();

    let mut shots = Vec::new();
    let mut counts = Vec::new();
    while let Some((lineno, line)) = lines.next() {
        if line.trim().is_empty() {
            // Tolerate blank separators between image records.
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 10 {
            return Err(Error::parse(
                format!("images.txt line {lineno}"),
                format!(
                    "expected 10 tokens (IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME), found {}",
                    tok.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            tok[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::parse(
                    format!("images.txt line {lineno}"),
                    format!("invalid number `{}`", tok[i]),
                )
            })
        };
        let q = Rotation::from_quaternion(num(1)?, num(2)?, num(3)?, num(4)?)
            .map_err(|e| Error::parse(format!("images.txt line {lineno}"), e.to_string()))?;
        let t = Vec3::new(num(5)?, num(6)?, num(7)?);
        let name = tok[9].to_string();

        let observed = match lines.next() {
            Some((obs_line, obs)) => {
                let ot: Vec<&str> = obs.split_whitespace().collect();
                if !ot.len().is_multiple_of(3) {
                    return Err(Error::parse(
                        format!("images.txt line {obs_line}"),
                        format!("observation line has {} tokens, not a multiple of 3", ot.len()),
                    ));
                }
                let mut n = 0u64;
                for triple in ot.chunks(3) {
                    let id: i64 = triple[2].parse().map_err(|_| {
                        Error::parse(
                            format!("images.txt line {obs_line}"),
                            format!("invalid POINT3D_ID `{}`", triple[2]),
                        )
                    })?;
                    if id >= 0 {
                        n += 1;
                    }
                }
                n
            }
            None => 0,
        };
        counts.push((name.clone(), observed));
        shots.push((name, q, t));
    }
    let trajectory = trajectory_from_shots(shots, "colmap")?;

    let mut pts = Vec::new();
    let mut colors = Vec::new();
    let mut tracks = Vec::new();
    for (i, line) in points.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 8 || !(tok.len() - 8).is_multiple_of(2) {
            return Err(Error::parse(
                format!("points3D.txt line {lineno}"),
                format!(
                    "expected 8 + 2k tokens (POINT3D_ID X Y Z R G B ERROR TRACK[]), found {}",
                    tok.len()
                ),
            ));
        }
        let bad = |s: &str| Error::parse(format!("points3D.txt line {lineno}"), format!("invalid value `{s}`"));
        let xyz: Vec<f64> = tok[1..4]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(s)))
            .collect::<Result<_>>()?;
        let rgb: Vec<u8> = tok[4..7]
            .iter()
            .map(|s| s.parse::<u8>().map_err(|_| bad(s)))
            .collect::<Result<_>>()?;
        pts.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
        colors.push([rgb[0], rgb[1], rgb[2]]);
        tracks.push(((tok.len() - 8) / 2) as u32);
    }
    let mut cloud = PointCloud::new(pts).with_colors(colors)?.with_track_lengths(tracks)?;
    let dropped_points = cloud.retain_finite();

    let features = FeatureReport {
        frames: trajectory
            .names()
            .iter()
            .zip(trajectory.poses())
            .map(|(n, p)| FrameFeatures {
                frame_id: n.clone(),
                timestamp: p.timestamp,
                count: counts.iter().find(|(m, _)| m == n).map_or(0, |c| c.1),
            })
            .collect(),
    };

    Ok(Reconstruction {
        trajectory,
        cloud,
        features: Some(features),
        dropped_points,
    })
}

fn utf8<'a>(bytes: &'a [u8], what: &str) -> Result<&'a str> {
    std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(format!("{what} byte {}", e.valid_up_to()), "input is not valid UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const IMAGES: &str = "# Image list with two lines of data per image:\n\
        #   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n\
        #   POINTS2D[] as (X, Y, POINT3D_ID)\n\
        # Number of images: 2, mean observations per image: 1.5\n\
        2 0.7071067811865476 0 0 0.7071067811865476 1 2 3 1 img_b.png\n\
        10.0 20.0 5 30.0 40.0 -1\n\
        1 1 0 0 0 0 0 0 1 img_a.png\n\
        1.0 2.0 5 3.0 4.0 6\n";

    const POINTS: &str = "# 3D point list with one line of data per point:\n\
        5 0.1 0.2 0.3 255 128 0 0.5 1 0 2 0\n\
        6 -1 -2 -3 1 2 3 0.1 1 1\n";

    #[test]
    fn golden_two_images() {
        let rec = parse_colmap_text(IMAGES.as_bytes(), POINTS.as_bytes()).unwrap();
        let t = &rec.trajectory;
        assert_eq!(t.names(), ["img_a.png", "img_b.png"]);
        // img_a: identity, t = 0 → c = 0.
        assert!(t.poses()[0].center.norm() < 1e-15);
        // img_b: Rz(90°), t = (1,2,3) → c = -Rᵀt = -(2,-1,3) = (-2,1,-3).
        assert!((t.poses()[1].center - Vec3::new(-2.0, 1.0, -3.0)).norm() < 1e-12);
        for p in t.poses() {
            assert!((p.rotation.rotate(&p.center) + p.translation()).norm() < 1e-12);
        }
        assert_eq!(rec.cloud.len(), 2);
        assert_eq!(rec.cloud.colors.as_ref().unwrap()[0], [255, 128, 0]);
        assert_eq!(rec.cloud.track_lengths.as_ref().unwrap(), &[2, 1]);
        let f = rec.features.unwrap();
        let counts: Vec<u64> = f.frames.iter().map(|f| f.count).collect();
        assert_eq!(counts, [2, 1]);
    }

    #[test]
    fn identity_pose_at_origin() {
        let rec = parse_colmap_text(b"1 1 0 0 0 0 0 0 1 a.png\n\n", b"").unwrap();
        assert_eq!(rec.trajectory.poses()[0].center, Vec3::zeros());
        assert!(rec.cloud.is_empty());
    }

    #[test]
    fn comments_only_is_empty_input() {
        let err = parse_colmap_text(b"# nothing\n# here\n", b"").unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn token_count_errors_carry_line_numbers() {
        let err = parse_colmap_text(b"# c\n1 1 0 0 0 0 0 1 a.png\n\n", b"").unwrap_err();
        assert!(err.to_string().contains("images.txt line 2"), "{err}");
        let err = parse_colmap_text(b"1 1 0 0 0 0 0 0 1 a.png\n1 2\n", b"").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_colmap_text(b"1 1 0 0 0 0 0 0 1 a.png\n\n", b"# p\n1 0 0 0 1 1 1\n").unwrap_err();
        assert!(err.to_string().contains("points3D.txt line 2"), "{err}");
    }
}
