use serde::{Deserialize, Serialize};

use super::Plane;
use crate::error::{Error, Result};
use crate::geom::{Rotation, Vec3};

/// Minimum angle between the two normals that span the frame.
const MIN_SEPARATION_DEG: f64 = 10.0;

/// Body-fixed frame: origin at the centroid, axes from plane normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetFrame {
    pub origin: Vec3,
    /// Columns are `x_T`, `y_T`, `z_T` expressed in world coordinates.
    pub axes: Rotation,
}

impl TargetFrame {
    pub fn identity() -> Self {
        Self {
            origin: Vec3::zeros(),
            axes: Rotation::identity(),
        }
    }

    /// Expresses a world-frame direction in target axes.
    pub fn to_target(&self, v: &Vec3) -> Vec3 {
        self.axes.inverse().rotate(v)
    }

    /// Expresses a world-frame point in target coordinates.
    pub fn point_to_target(&self, p: &Vec3) -> Vec3 {
        self.to_target(&(p - self.origin))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FrameJson::from(self)).expect("frame serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: FrameJson = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        let axes = Rotation::from_axes(&f.x_axis.into(), &f.y_axis.into(), &f.z_axis.into())?;
        Ok(Self {
            origin: f.origin.into(),
            axes,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    origin: [f64; 3],
    x_axis: [f64; 3],
    y_axis: [f64; 3],
    z_axis: [f64; 3],
}

impl From<&TargetFrame> for FrameJson {
    fn from(f: &TargetFrame) -> Self {
        let m = f.axes.matrix();
        let col = |k: usize| [m[(0, k)], m[(1, k)], m[(2, k)]];
        Self {
            origin: f.origin.into(),
            x_axis: col(0),
            y_axis: col(1),
            z_axis: col(2),
        }
    }
}

/// Builds the target frame from detected planes.
///
/// `x_T` is the normal of the plane with the most inliers. `z_T` comes from
/// the largest remaining plane whose normal is at least 10° away from the
/// `x_T` line, orthogonalized against `x_T`; `y_T = z_T × x_T`.
pub fn define_target_frame(planes: &[Plane], origin: Vec3) -> Result<TargetFrame> {
    if planes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 planes to define a frame, got {}",
            planes.len()
        )));
    }
    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by(|&a, &b| planes[b].inliers.len().cmp(&planes[a].inliers.len()).then(a.cmp(&b)));
    let x = planes[order[0]].normal.normalize();
    let min_sin = MIN_SEPARATION_DEG.to_radians().sin();
    let second = order[1..]
        .iter()
        .map(|&i| planes[i].normal.normalize())
        .find(|n| n.cross(&x).norm() >= min_sin * (1.0 - 1e-12))
        .ok_or_else(|| {
            Error::Degenerate(format!(
                "all plane normals lie within {MIN_SEPARATION_DEG}° of the primary normal"
            ))
        })?;
    let z = (second - x * second.dot(&x)).normalize();
    let y = z.cross(&x);
    Ok(TargetFrame {
        origin,
        axes: Rotation::from_axes(&x, &y, &z)?,
    })
}
