//! Completion of damaged primitive shapes.
//!
//! The primitive is fitted to the detected planes, its surface is split into
//! coarse cells, and every cell that the observed cloud leaves empty is
//! filled with a regular grid of points at the observed areal density.
//! Only faces (cube) or the lateral surface (cylinder) are filled; edges,
//! corners and cylinder caps are not synthesized.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{median_nn_distance, Plane};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Cube,
    Cylinder,
}

/// Coarse coverage cells are this many point spacings wide.
const COARSE_CELLS_PER_SPACING: f64 = 4.0;
/// A coarse cell counts as observed when it holds at least this many points.
const MIN_POINTS_PER_CELL: usize = 2;

/// Returns `cloud` plus synthesized points on the primitive's missing
/// surface patches.
pub fn complete_shape(cloud: &PointCloud, primitive: Primitive, planes: &[Plane]) -> Result<PointCloud> {
    let synthesized = match primitive {
        Primitive::Cube => complete_cube(cloud, planes)?,
        Primitive::Cylinder => complete_cylinder(cloud, planes)?,
    };
    let count = synthesized.len();
    let mut extra = PointCloud::new(synthesized);
    if let Some(colors) = &cloud.colors {
        let n = colors.len().max(1) as u64;
        let mean = [0, 1, 2].map(|k| (colors.iter().map(|c| c[k] as u64).sum::<u64>() / n) as u8);
        extra = extra.with_colors(vec![mean; count])?;
    }
    if cloud.track_lengths.is_some() {
        extra = extra.with_track_lengths(vec![0; count])?;
    }
    let mut out = cloud.clone();
    out.extend(&extra);
    Ok(out)
}

/// Rectangular surface patch `origin + s·e1 + t·e2`, `s ∈ [0, len1]`,
/// `t ∈ [0, len2]`, filled where the coverage test reports a hole.
struct Patch {
    len1: f64,
    len2: f64,
}

/// Splits a patch into coarse cells, marks the ones holding fewer than
/// [`MIN_POINTS_PER_CELL`] observations, and returns the patch coordinates
/// of grid points filling them at `spacing`.
fn fill_holes(patch: &Patch, spacing: f64, observed: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let coarse = COARSE_CELLS_PER_SPACING * spacing;
    let n1 = ((patch.len1 / coarse).floor() as usize).max(1);
    let n2 = ((patch.len2 / coarse).floor() as usize).max(1);
    let (c1, c2) = (patch.len1 / n1 as f64, patch.len2 / n2 as f64);
    let mut counts = vec![0usize; n1 * n2];
    for &(s, t) in observed {
        if s < 0.0 || t < 0.0 || s > patch.len1 || t > patch.len2 {
            continue;
        }
        let i = ((s / c1) as usize).min(n1 - 1);
        let j = ((t / c2) as usize).min(n2 - 1);
        counts[i * n2 + j] += 1;
    }
    let f1 = ((c1 / spacing).round() as usize).max(1);
    let f2 = ((c2 / spacing).round() as usize).max(1);
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if counts[i * n2 + j] >= MIN_POINTS_PER_CELL {
                continue;
            }
            for a in 0..f1 {
                for b in 0..f2 {
                    out.push((
                        i as f64 * c1 + (a as f64 + 0.5) * c1 / f1 as f64,
                        j as f64 * c2 + (b as f64 + 0.5) * c2 / f2 as f64,
                    ));
                }
            }
        }
    }
    out
}

fn complete_cube(cloud: &PointCloud, planes: &[Plane]) -> Result<Vec<Vec3>> {
    if planes.len() < 3 {
        return Err(Error::invalid(format!(
            "cube completion requires at least 3 detected planes, got {}",
            planes.len()
        )));
    }
    let pts = &cloud.points;
    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by(|&a, &b| planes[b].inliers.len().cmp(&planes[a].inliers.len()).then(a.cmp(&b)));

    let a1 = planes[order[0]].normal.normalize();
    let second = order[1..]
        .iter()
        .map(|&i| planes[i].normal.normalize())
        .min_by(|p, q| p.dot(&a1).abs().total_cmp(&q.dot(&a1).abs()))
        .expect("at least 3 planes");
    if second.dot(&a1).abs() > 45f64.to_radians().cos() {
        return Err(Error::Degenerate(
            "no plane is roughly orthogonal to the largest one".into(),
        ));
    }
    let a2 = (second - a1 * second.dot(&a1)).normalize();
    let axes = [a1, a2, a1.cross(&a2)];

    // Axis assignment and position of each plane.
    let assigned: Vec<(usize, f64)> = planes
        .iter()
        .map(|p| {
            let k = (0..3)
                .max_by(|&i, &j| p.normal.dot(&axes[i]).abs().total_cmp(&p.normal.dot(&axes[j]).abs()))
                .expect("3 axes");
            let pos = if p.inliers.is_empty() {
                -p.offset * p.normal.dot(&axes[k]).signum()
            } else {
                p.inliers.iter().map(|&i| axes[k].dot(&pts[i])).sum::<f64>() / p.inliers.len() as f64
            };
            (k, pos)
        })
        .collect();

    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    for k in 0..3 {
        let on_axis: Vec<f64> = assigned.iter().filter(|a| a.0 == k).map(|a| a.1).collect();
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for (p, a) in planes.iter().zip(&assigned) {
            if a.0 != k {
                for &i in &p.inliers {
                    let s = axes[k].dot(&pts[i]);
                    mn = mn.min(s);
                    mx = mx.max(s);
                }
            }
        }
        let have_span = mn < mx;
        let (lo, hi) = match on_axis.len() {
            0 if have_span => (mn, mx),
            1 if have_span => {
                let pos = on_axis[0];
                if (pos - mn).abs() <= (pos - mx).abs() {
                    (pos, mx)
                } else {
                    (mn, pos)
                }
            }
            n if n >= 2 => (
                on_axis.iter().copied().fold(f64::INFINITY, f64::min),
                on_axis.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            _ => {
                return Err(Error::Degenerate(format!(
                    "cannot bound the cube along axis {k}: no plane spans it"
                )))
            }
        };
        if hi - lo <= 0.0 {
            return Err(Error::Degenerate(format!("cube extent along axis {k} is empty")));
        }
        lower[k] = lo;
        upper[k] = hi;
    }
    let ext = [0, 1, 2].map(|k| upper[k] - lower[k]);

    // Observed areal density over the detected faces.
    let density = planes
        .iter()
        .zip(&assigned)
        .map(|(p, a)| {
            let (j, l) = ((a.0 + 1) % 3, (a.0 + 2) % 3);
            p.inliers.len() as f64 / (ext[j] * ext[l])
        })
        .sum::<f64>()
        / planes.len() as f64;
    if density <= 0.0 {
        return Err(Error::Degenerate("detected planes carry no inliers".into()));
    }
    let spacing = density.sqrt().recip();

    let mut out = Vec::new();
    for k in 0..3 {
        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
        for w in [lower[k], upper[k]] {
            let margin = 2.0 * spacing;
            let observed: Vec<(f64, f64)> = pts
                .iter()
                .filter(|p| (axes[k].dot(p) - w).abs() <= spacing)
                .map(|p| (axes[j].dot(p) - lower[j], axes[l].dot(p) - lower[l]))
                .filter(|&(s, t)| s > margin && t > margin && s < ext[j] - margin && t < ext[l] - margin)
                .collect();
            let patch = Patch {
                len1: ext[j],
                len2: ext[l],
            };
            for (s, t) in fill_holes(&patch, spacing, &observed) {
                out.push(axes[k] * w + axes[j] * (lower[j] + s) + axes[l] * (lower[l] + t));
            }
        }
    }
    Ok(out)
}

fn complete_cylinder(cloud: &PointCloud, planes: &[Plane]) -> Result<Vec<Vec3>> {
    let cap = planes.iter().max_by_key(|p| p.inliers.len()).ok_or_else(|| {
        Error::invalid("cylinder completion requires at least 1 detected plane (an end cap) to fix the axis")
    })?;
    let pts = &cloud.points;
    let axis = cap.normal.normalize();
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);

    let mut on_plane = vec![false; pts.len()];
    for p in planes {
        for &i in &p.inliers {
            on_plane[i] = true;
        }
    }
    let lateral: Vec<Vec3> = (0..pts.len()).filter(|&i| !on_plane[i]).map(|i| pts[i]).collect();
    if lateral.len() < 3 {
        return Err(Error::Degenerate(
            "fewer than 3 lateral points for the cylinder fit".into(),
        ));
    }

    // Algebraic circle fit: x² + y² + D x + E y + F = 0.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in &lateral {
        let (x, y) = (u.dot(p), v.dot(p));
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb -= row * (x * x + y * y);
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Degenerate("lateral points do not determine a circle".into()))?;
    let (cx, cy) = (-0.5 * sol.x, -0.5 * sol.y);
    let r2 = cx * cx + cy * cy - sol.z;
    if !(r2 > 0.0) {
        return Err(Error::Degenerate("circle fit produced a non-positive radius".into()));
    }
    let radius = r2.sqrt();

    let heights = lateral.iter().map(|p| axis.dot(p));
    let (mut h_lo, mut h_hi) = heights.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), h| (a.min(h), b.max(h)));
    for p in planes {
        if p.normal.normalize().dot(&axis).abs() > 0.9 && !p.inliers.is_empty() {
            let h = p.inliers.iter().map(|&i| axis.dot(&pts[i])).sum::<f64>() / p.inliers.len() as f64;
            h_lo = h_lo.min(h);
            h_hi = h_hi.max(h);
        }
    }
    let height = h_hi - h_lo;
    if !(height > 0.0) {
        return Err(Error::Degenerate("cylinder has no height".into()));
    }
    let circumference = 2.0 * std::f64::consts::PI * radius;

    // Unrolled lateral surface coordinates (arc length, height).
    let nn = median_nn_distance(&PointCloud::new(lateral.clone()))
        .unwrap_or(0.0)
        .max(1e-12);
    let tol = (2.0 * nn).max(0.05 * radius);
    let observed: Vec<(f64, f64)> = lateral
        .iter()
        .filter_map(|p| {
            let (x, y) = (u.dot(p) - cx, v.dot(p) - cy);
            let rho = x.hypot(y);
            ((rho - radius).abs() <= tol).then(|| {
                let theta = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
                (theta * radius, axis.dot(p) - h_lo)
            })
        })
        .collect();

    // Density from the occupied coarse cells.
    let coarse = COARSE_CELLS_PER_SPACING * nn;
    let n1 = ((circumference / coarse).floor() as usize).max(3);
    let n2 = ((height / coarse).floor() as usize).max(1);
    let (c1, c2) = (circumference / n1 as f64, height / n2 as f64);
    let mut counts = vec![0usize; n1 * n2];
    for &(s, t) in &observed {
        let i = ((s / c1) as usize).min(n1 - 1);
        let j = ((t / c2).max(0.0) as usize).min(n2 - 1);
        counts[i * n2 + j] += 1;
    }
    let occupied: Vec<usize> = counts.iter().copied().filter(|&c| c >= MIN_POINTS_PER_CELL).collect();
    if occupied.is_empty() {
        return Err(Error::Degenerate("no lateral surface observed".into()));
    }
    let density = occupied.iter().sum::<usize>() as f64 / (occupied.len() as f64 * c1 * c2);
    let spacing = density.sqrt().recip();

    let patch = Patch {
        len1: circumference,
        len2: height,
    };
    Ok(fill_holes(&patch, spacing, &observed)
        .into_iter()
        .map(|(s, t)| {
            let theta = s / radius;
            u * (cx + radius * theta.cos()) + v * (cy + radius * theta.sin()) + axis * (h_lo + t)
        })
        .collect())
}
