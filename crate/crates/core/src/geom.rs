//! 3D value types and SO(3) utilities.
//!
//! Rotations are stored as unit quaternions and renormalized after every
//! composition so that long products (hundreds of relative increments) stay
//! on the manifold. The 3×3 matrix is computed on demand.
//!
//! Pose convention: `rotation` maps world (target-fixed, SfM) coordinates into
//! the camera frame and `center` is the camera position in world coordinates.
//! Tools that store a translation `t` (with `x_cam = R·x_world + t`) convert
//! through [`Pose::from_rotation_translation`], using `c = -Rᵀ·t`.

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this rotation-vector norm exp/log switch to Taylor series.
const SERIES_THRESHOLD: f64 = 1e-6;

/// A proper rotation backed by a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    q: UnitQuaternion<f64>,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            q: UnitQuaternion::identity(),
        }
    }

    /// Builds a rotation from quaternion components (scalar first).
    /// The input is normalized; zero or non-finite quaternions are rejected.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let raw = Quaternion::new(w, x, y, z);
        let n = raw.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::invalid(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Self {
            q: UnitQuaternion::new_unchecked(raw / n),
        })
    }

    pub(crate) fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self {
            q: UnitQuaternion::new_normalize(q.into_inner()),
        }
    }

    /// Builds a rotation from a 3×3 matrix. Matrices that are orthonormal
    /// with det +1 (within 1e-6) are converted directly; anything else is
    /// rejected.
    pub fn from_matrix(m: &Mat3) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("rotation matrix has non-finite entries"));
        }
        let ortho = (m.transpose() * m - Mat3::identity()).amax();
        let det = m.determinant();
        if ortho > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "matrix is not a proper rotation (orthogonality error {ortho:.3e}, det {det:.6})"
            )));
        }
        let r = Rotation3::from_matrix_unchecked(*m);
        Ok(Self::from_unit_quaternion(UnitQuaternion::from_rotation_matrix(&r)))
    }

    /// Exponential map: rotation by `|v|` radians about `v / |v|`.
    pub fn exp(v: &Vec3) -> Self {
        let theta = v.norm();
        let half = 0.5 * theta;
        let (w, k) = if theta < SERIES_THRESHOLD {
            // sin(θ/2)/θ ≈ 1/2 − θ²/48
            (1.0 - theta * theta / 8.0, 0.5 - theta * theta / 48.0)
        } else {
            (half.cos(), half.sin() / theta)
        };
        Self::from_unit_quaternion(UnitQuaternion::new_unchecked(Quaternion::new(
            w,
            k * v.x,
            k * v.y,
            k * v.z,
        )))
    }

    /// Logarithm map: the rotation vector with norm in `[0, π]`.
    ///
    /// At exactly π the axis sign is ambiguous; the returned axis follows the
    /// sign of the stored quaternion's vector part.
    pub fn log(&self) -> Vec3 {
        let q = self.q.quaternion();
        let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
        let s = v.norm();
        let k = if s < 0.5 * SERIES_THRESHOLD {
            // 2·atan(s/w)/s ≈ (2/w)(1 − s²/(3w²))
            2.0 / w * (1.0 - s * s / (3.0 * w * w))
        } else {
            2.0 * s.atan2(w) / s
        };
        v * k
    }

    pub fn about_axis(axis: &Vec3, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !n.is_finite() || n < 1e-15 {
            return Err(Error::invalid("rotation axis must be non-zero"));
        }
        Ok(Self::exp(&(axis * (angle / n))))
    }

    pub fn rx(angle: f64) -> Self {
        Self::exp(&Vec3::new(angle, 0.0, 0.0))
    }

    pub fn ry(angle: f64) -> Self {
        Self::exp(&Vec3::new(0.0, angle, 0.0))
    }

    pub fn rz(angle: f64) -> Self {
        Self::exp(&Vec3::new(0.0, 0.0, angle))
    }

    /// `self · other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Self::from_unit_quaternion(self.q * other.q)
    }

    pub fn inverse(&self) -> Rotation {
        Self { q: self.q.inverse() }
    }

    pub fn matrix(&self) -> Mat3 {
        self.q.to_rotation_matrix().into_inner()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.q * v
    }

    /// Quaternion components `[w, x, y, z]`, sign-canonicalized so `w ≥ 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.q.quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.log().norm()
    }

    /// Geodesic distance to `other` in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.inverse().compose(other).angle()
    }

    /// Geodesic interpolation: `s = 0` gives `self`, `s = 1` gives `other`.
    pub fn interpolate(&self, other: &Rotation, s: f64) -> Rotation {
        let delta = self.inverse().compose(other).log();
        self.compose(&Rotation::exp(&(delta * s)))
    }

    pub fn unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.q
    }

    /// Rotation whose columns are the given orthonormal right-handed axes.
    pub fn from_axes(x: &Vec3, y: &Vec3, z: &Vec3) -> Result<Self> {
        Self::from_matrix(&Mat3::from_columns(&[*x, *y, *z]))
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.rotate(&rhs)
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.quaternion().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        Rotation::from_quaternion(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

pub fn rotation_compose(a: &Rotation, b: &Rotation) -> Rotation {
    a.compose(b)
}

pub fn rotation_inverse(r: &Rotation) -> Rotation {
    r.inverse()
}

pub fn so3_log(r: &Rotation) -> Vec3 {
    r.log()
}

pub fn so3_exp(v: &Vec3) -> Rotation {
    Rotation::exp(v)
}

/// Unit vector along `v`, or `None` when `v` is (numerically) zero.
pub fn unit(v: &Vec3) -> Option<Unit<Vec3>> {
    Unit::try_new(*v, 1e-300)
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// A time-stamped camera pose in the world (target-fixed) frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    /// World-to-camera rotation.
    pub rotation: Rotation,
    /// Camera center in world coordinates.
    pub center: Vec3,
    /// Seconds.
    pub timestamp: f64,
}

impl Pose {
    pub fn new(rotation: Rotation, center: Vec3, timestamp: f64) -> Result<Self> {
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(Error::invalid(format!(
                "pose timestamp must be finite and non-negative, got {timestamp}"
            )));
        }
        if !is_finite(&center) {
            return Err(Error::invalid("pose center must be finite"));
        }
        Ok(Self {
            rotation,
            center,
            timestamp,
        })
    }

    /// Converts the `x_cam = R·x_world + t` convention into a camera center.
    pub fn from_rotation_translation(rotation: Rotation, t: &Vec3, timestamp: f64) -> Result<Self> {
        let center = -(rotation.inverse().rotate(t));
        Self::new(rotation, center, timestamp)
    }

    /// Translation `t = -R·c` of the `x_cam = R·x_world + t` convention.
    pub fn translation(&self) -> Vec3 {
        -self.rotation.rotate(&self.center)
    }

    /// Camera orientation expressed in the world frame (camera-to-world).
    pub fn camera_to_world(&self) -> Rotation {
        self.rotation.inverse()
    }
}
