//! Point-cloud conditioning, plane detection, shape completion and the
//! body-fixed target frame.

mod filter;
mod frame;
mod ransac;
mod shape;

pub use filter::{centroid, median_nn_distance, radius_outlier_removal, voxel_downsample, voxel_downsample_anchored};
pub use frame::{define_target_frame, TargetFrame};
pub use ransac::{detect_planes, ransac_plane, ransac_plane_on, Plane};
pub use shape::{complete_shape, Primitive};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Conditioning and plane-detection parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningParams {
    pub radius: f64,
    pub min_neighbors: usize,
    pub voxel_size: f64,
    pub ransac_threshold: f64,
    pub max_iterations: usize,
    pub min_inlier_fraction: f64,
    pub max_planes: usize,
}

impl ConditioningParams {
    /// Scale-free defaults derived from the median nearest-neighbor
    /// distance `s` of the cloud: radius 3s, 4 neighbors, voxel 2s,
    /// RANSAC threshold s, 1000 iterations, 15 % minimum inlier fraction,
    /// up to 6 planes.
    pub fn from_cloud(cloud: &PointCloud) -> Result<Self> {
        let s = median_nn_distance(cloud)
            .filter(|s| *s > 0.0)
            .ok_or_else(|| Error::Degenerate("cannot derive spacing from fewer than 2 distinct points".into()))?;
        Ok(Self {
            radius: 3.0 * s,
            min_neighbors: 4,
            voxel_size: 2.0 * s,
            ransac_threshold: s,
            max_iterations: 1000,
            min_inlier_fraction: 0.15,
            max_planes: 6,
        })
    }
}

/// Output of [`condition`]: the denoised, homogenized cloud and the planes
/// detected on it.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub cloud: PointCloud,
    pub planes: Vec<Plane>,
    pub removed_outliers: usize,
}

/// Radius outlier removal, voxel down-sampling, then plane detection.
pub fn condition(cloud: &PointCloud, params: &ConditioningParams, seed: u64) -> Result<Conditioned> {
    let denoised = radius_outlier_removal(cloud, params.radius, params.min_neighbors)?;
    let removed_outliers = cloud.len() - denoised.len();
    let homogenized = voxel_downsample(&denoised, params.voxel_size)?;
    let planes = detect_planes(
        &homogenized,
        params.max_planes,
        params.ransac_threshold,
        params.min_inlier_fraction,
        params.max_iterations,
        seed,
    )?;
    Ok(Conditioned {
        cloud: homogenized,
        planes,
        removed_outliers,
    })
}
