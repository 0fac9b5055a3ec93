//! RANSAC plane fitting with a least-squares refit on the consensus set.
//!
//! Every iteration draws its 3-point sample from its own ChaCha stream
//! (`seed`, stream = iteration index), so iterations can run in parallel and
//! the winning hypothesis (most inliers, lowest iteration on ties) does not
//! depend on the thread count.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

/// `normal · p + offset = 0`, with `|normal| = 1` and `offset ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    /// Indices (into the cloud passed to the detector) within the fit threshold.
    pub inliers: Vec<usize>,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    fn canonical(normal: Vec3, offset: f64) -> (Vec3, f64) {
        let flip = offset > 0.0 || (offset == 0.0 && normal.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0));
        if flip {
            (-normal, -offset)
        } else {
            (normal, offset)
        }
    }
}

fn inliers_of(points: &[Vec3], subset: &[usize], normal: &Vec3, offset: f64, threshold: f64) -> Vec<usize> {
    subset
        .iter()
        .copied()
        .filter(|&i| (normal.dot(&points[i]) + offset).abs() <= threshold)
        .collect()
}

/// Plane through the centroid of `idx` along the smallest principal axis.
fn pca_plane(points: &[Vec3], idx: &[usize]) -> Option<(Vec3, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let mean = idx.iter().map(|&i| points[i]).sum::<Vec3>() / idx.len() as f64;
    let mut cov = Mat3::zeros();
    for &i in idx {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(k).normalize();
    if !n.iter().all(|c| c.is_finite()) {
        return None;
    }
    Some((n, -n.dot(&mean)))
}

/// RANSAC plane over the whole cloud.
pub fn ransac_plane(cloud: &PointCloud, threshold: f64, max_iterations: usize, seed: u64) -> Result<Plane> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    ransac_plane_on(&cloud.points, &all, threshold, max_iterations, seed)
}

/// RANSAC plane restricted to `subset` of `points`; inlier indices refer
/// to `points`.
pub fn ransac_plane_on(
    points: &[Vec3],
    subset: &[usize],
    threshold: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<Plane> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {threshold}")));
    }
    if subset.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 points, got {}",
            subset.len()
        )));
    }
    if max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be at least 1"));
    }
    let n = subset.len();

    let best = (0..max_iterations)
        .into_par_iter()
        .filter_map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(it as u64);
            let pick = rand::seq::index::sample(&mut rng, n, 3);
            let (a, b, c) = (
                points[subset[pick.index(0)]],
                points[subset[pick.index(1)]],
                points[subset[pick.index(2)]],
            );
            let (u, v) = (b - a, c - a);
            let cross = u.cross(&v);
            let scale = u.norm() * v.norm();
            if !(cross.norm() > 1e-12 * scale && scale > 0.0) {
                return None;
            }
            let normal = cross.normalize();
            let offset = -normal.dot(&a);
            let count = subset
                .iter()
                .filter(|&&i| (normal.dot(&points[i]) + offset).abs() <= threshold)
                .count();
            Some((count, it, normal, offset))
        })
        .reduce_with(|x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
        .ok_or_else(|| Error::Degenerate("every RANSAC sample was collinear; no plane".into()))?;

    let (_, _, normal, offset) = best;
    let consensus = inliers_of(points, subset, &normal, offset, threshold);
    let (normal, offset, inliers) = match pca_plane(points, &consensus) {
        Some((n2, d2)) => {
            let refit = inliers_of(points, subset, &n2, d2, threshold);
            if refit.len() >= 3 {
                (n2, d2, refit)
            } else {
                (normal, offset, consensus)
            }
        }
        None => (normal, offset, consensus),
    };
    let (normal, offset) = Plane::canonical(normal, offset);
    Ok(Plane {
        normal,
        offset,
        inliers,
    })
}

/// Sequential plane extraction: fit, remove inliers, repeat until
/// `max_planes` planes are found or the best plane holds less than
/// `min_inlier_fraction` of the remaining points. Planes come back in
/// detection order with inlier indices into `cloud`.
pub fn detect_planes(
    cloud: &PointCloud,
    max_planes: usize,
    threshold: f64,
    min_inlier_fraction: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<Vec<Plane>> {
    if !(0.0..=1.0).contains(&min_inlier_fraction) {
        return Err(Error::invalid("min_inlier_fraction must lie in [0, 1]"));
    }
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut planes = Vec::new();
    while planes.len() < max_planes && remaining.len() >= 3 {
        let plane = match ransac_plane_on(
            &cloud.points,
            &remaining,
            threshold,
            max_iterations,
            seed.wrapping_add(planes.len() as u64),
        ) {
            Ok(p) => p,
            Err(Error::Degenerate(_)) => break,
            Err(e) => return Err(e),
        };
        if (plane.inliers.len() as f64) < min_inlier_fraction * remaining.len() as f64 {
            break;
        }
        let taken: std::collections::HashSet<usize> = plane.inliers.iter().copied().collect();
        remaining.retain(|i| !taken.contains(i));
        planes.push(plane);
    }
    Ok(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn exact_plane_z_equals_one() {
        let pts: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new((i % 7) as f64 * 0.3, (i / 7) as f64 * 0.2, 1.0))
            .collect();
        let p = ransac_plane(&PointCloud::new(pts), 1e-6, 200, 1).unwrap();
        assert!((p.normal - Vec3::z()).norm() < 1e-12);
        assert!((p.offset + 1.0).abs() < 1e-12);
        assert_eq!(p.inliers.len(), 50);
    }

    #[test]
    fn three_points_give_their_plane() {
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let p = ransac_plane(&PointCloud::new(pts.clone()), 1e-9, 10, 0).unwrap();
        let expected = Vec3::new(1.0, 1.0, 1.0).normalize();
        assert!((p.normal - expected).norm() < 1e-12);
        for q in &pts {
            assert!(p.signed_distance(q).abs() < 1e-12);
        }
        assert!(p.offset <= 0.0);
    }

    #[test]
    fn collinear_points_have_no_plane() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let err = ransac_plane(&PointCloud::new(pts), 0.1, 50, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    fn noisy_plane_cloud(seed: u64) -> (PointCloud, Vec3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Vec3::new(0.3, -0.5, 0.8).normalize();
        let u = normal.cross(&Vec3::x()).normalize();
        let v = normal.cross(&u);
        let mut pts = Vec::new();
        for _ in 0..950 {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let e: f64 = rng.random_range(-0.002..0.002);
            pts.push(u * a + v * b + normal * (2.0 + e));
        }
        for _ in 0..50 {
            pts.push(Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..4.0),
            ));
        }
        (PointCloud::new(pts), normal)
    }

    #[test]
    fn recovers_plane_with_outliers() {
        let (cloud, truth) = noisy_plane_cloud(5);
        let p = ransac_plane(&cloud, 0.01, 500, 9).unwrap();
        let angle = p.normal.dot(&truth).abs().min(1.0).acos().to_degrees();
        assert!(angle < 0.5, "angle {angle}");
        for &i in &p.inliers {
            assert!(p.signed_distance(&cloud.points[i]).abs() <= 0.01);
        }
        assert!((p.normal.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (cloud, _) = noisy_plane_cloud(8);
        let a = ransac_plane(&cloud, 0.01, 300, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| ransac_plane(&cloud, 0.01, 300, 42).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn single_plane_cloud_yields_one_plane() {
        let pts: Vec<Vec3> = (0..400)
            .map(|i| Vec3::new((i % 20) as f64 * 0.05, (i / 20) as f64 * 0.05, 0.5))
            .collect();
        let planes = detect_planes(&PointCloud::new(pts), 6, 0.01, 0.15, 200, 3).unwrap();
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].inliers.len(), 400);
    }

    #[test]
    fn pure_noise_yields_no_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pts: Vec<Vec3> = (0..2000)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let planes = detect_planes(&PointCloud::new(pts), 6, 0.01, 0.3, 500, 3).unwrap();
        assert!(planes.is_empty());
    }
}
