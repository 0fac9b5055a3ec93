//! Sparse point clouds and per-frame feature statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{is_finite, Vec3};

pub type Rgb = [u8; 3];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Per-point color, parallel to `points` when present.
    pub colors: Option<Vec<Rgb>>,
    /// Per-point track length (number of observing images), when known.
    pub track_lengths: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            colors: None,
            track_lengths: None,
        }
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} colors for {} points",
                colors.len(),
                self.points.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn with_track_lengths(mut self, lengths: Vec<u32>) -> Result<Self> {
        if lengths.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} track lengths for {} points",
                lengths.len(),
                self.points.len()
            )));
        }
        self.track_lengths = Some(lengths);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps only the points at `indices` (in the given order), carrying
    /// colors and track lengths along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            track_lengths: self
                .track_lengths
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Drops points with non-finite coordinates and returns how many went.
    pub fn retain_finite(&mut self) -> usize {
        let keep: Vec<usize> = (0..self.points.len()).filter(|&i| is_finite(&self.points[i])).collect();
        let dropped = self.points.len() - keep.len();
        if dropped > 0 {
            *self = self.select(&keep);
        }
        dropped
    }

    /// Appends `other`. Attributes present on only one side are dropped.
    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors = match (self.colors.take(), &other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
        self.track_lengths = match (self.track_lengths.take(), &other.track_lengths) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(
            self.points
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub frame_id: String,
    pub timestamp: f64,
    pub count: u64,
}

/// Observed feature (track) counts per frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub frames: Vec<FrameFeatures>,
}

impl FeatureReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_id,timestamp_s,feature_count\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{},{},{}\n",
                f.frame_id,
                crate::fmt::sig9(f.timestamp),
                f.count
            ));
        }
        out
    }
}
