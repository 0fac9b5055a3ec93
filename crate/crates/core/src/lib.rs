//! Motion estimation of tumbling rigid bodies from structure-from-motion
//! reconstructions.
//!
//! A stationary camera observing a free-flying target is equivalent to a
//! camera moving around a static target. The apparent camera trajectory in
//! the target's reconstruction therefore encodes the target's linear and
//! angular velocity. This crate simulates such targets, ingests SfM output,
//! conditions the point cloud into a body-fixed frame, estimates motion and
//! evaluates it against ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod config;
pub mod error;
pub mod eval;
pub mod fmt;
pub mod geom;
pub mod ingest;
pub mod motion;
pub mod pipeline;
pub mod pointcloud;
pub mod sim;
pub mod trajectory;

pub use cloud::{FeatureReport, PointCloud};
pub use error::{Error, Result};
pub use geom::{Mat3, Pose, Rotation, Vec3};
pub use trajectory::{FrameTag, PoseTrajectory};
