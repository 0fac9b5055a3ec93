//! Torque-free (or constant-torque) rigid-body simulator.
//!
//! Integrates Euler's rotational equation `N = I·ω̇ + ω × I·ω` for a body with
//! diagonal inertia together with quaternion attitude kinematics using the
//! classical fourth-order Runge-Kutta scheme. The target drifts with constant
//! inertial velocity. [`to_camera_trajectory`] turns the sampled states into
//! the pose sequence that a static camera would produce after
//! structure-from-motion, i.e. the camera moving around a fixed target.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::geom::{is_finite, Pose, Rotation, Vec3};
use crate::trajectory::{FrameTag, PoseTrajectory};

/// Principal moments of inertia (kg·m²) and a constant body-frame torque (N·m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaModel {
    ixx: f64,
    iyy: f64,
    izz: f64,
    torque: Vec3,
}

impl InertiaModel {
    pub fn new(ixx: f64, iyy: f64, izz: f64) -> Result<Self> {
        Self::with_torque(ixx, iyy, izz, Vec3::zeros())
    }

    pub fn with_torque(ixx: f64, iyy: f64, izz: f64, torque: Vec3) -> Result<Self> {
        for (name, v) in [("I_xx", ixx), ("I_yy", iyy), ("I_zz", izz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        // Physical bodies satisfy the triangle inequality on principal moments.
        let eps = 1e-12 * (ixx + iyy + izz);
        if ixx + iyy < izz - eps || iyy + izz < ixx - eps || ixx + izz < iyy - eps {
            return Err(Error::invalid(format!(
                "principal moments ({ixx}, {iyy}, {izz}) violate the triangle inequality"
            )));
        }
        if !is_finite(&torque) {
            return Err(Error::invalid("torque must be finite"));
        }
        Ok(Self { ixx, iyy, izz, torque })
    }

    pub fn moments(&self) -> Vec3 {
        Vec3::new(self.ixx, self.iyy, self.izz)
    }

    pub fn torque(&self) -> Vec3 {
        self.torque
    }

    /// Body-frame angular momentum `I·ω`.
    pub fn momentum(&self, omega: &Vec3) -> Vec3 {
        self.moments().component_mul(omega)
    }

    /// Rotational kinetic energy `½ ωᵀ I ω`.
    pub fn kinetic_energy(&self, omega: &Vec3) -> f64 {
        0.5 * omega.dot(&self.momentum(omega))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    /// Body-to-inertial attitude.
    pub attitude: Rotation,
    /// Body-frame angular velocity, rad/s.
    pub omega: Vec3,
    /// Inertial position, m.
    pub position: Vec3,
    /// Inertial velocity, m/s.
    pub velocity: Vec3,
    pub time: f64,
}

impl RigidBodyState {
    pub fn at_rest() -> Self {
        Self {
            attitude: Rotation::identity(),
            omega: Vec3::zeros(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            time: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        is_finite(&self.omega)
            && is_finite(&self.position)
            && is_finite(&self.velocity)
            && self.time.is_finite()
            && self.attitude.quaternion().iter().all(|c| c.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub initial: RigidBodyState,
    pub inertia: InertiaModel,
    /// Seconds.
    pub duration: f64,
    /// Integrator substep, seconds.
    pub integrator_dt: f64,
    /// Output sampling interval, seconds.
    pub sample_interval: f64,
    /// Static camera position in the inertial frame, m.
    pub camera_position: Vec3,
}

impl SimConfig {
    /// The CubeSat-like symmetric top tumbling scenario: I = diag(0.47, 0.47,
    /// 0.02) kg·m², ω₀ = (0, 0.1, 1.0) deg/s, v₀ = (0.0045, 0, 0) m/s, sampled
    /// every 10 s for 3000 s with a 0.1 s integrator step. The camera sits on
    /// the +x axis 20 m from the target's initial position.
    pub fn tumbling_cubesat() -> Self {
        Self {
            initial: RigidBodyState {
                attitude: Rotation::identity(),
                omega: Vec3::new(0.0, 0.1, 1.0) * std::f64::consts::PI / 180.0,
                position: Vec3::zeros(),
                velocity: Vec3::new(0.0045, 0.0, 0.0),
                time: 0.0,
            },
            inertia: InertiaModel::new(0.47, 0.47, 0.02).expect("valid inertia"),
            duration: 3000.0,
            integrator_dt: 0.1,
            sample_interval: 10.0,
            camera_position: Vec3::new(20.0, 0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.integrator_dt) && ok(self.sample_interval) && ok(self.duration)) {
            return Err(Error::invalid("durations and steps must be positive"));
        }
        if self.integrator_dt > self.sample_interval * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "integrator_dt {} exceeds sample_interval {}",
                self.integrator_dt, self.sample_interval
            )));
        }
        if self.sample_interval > self.duration * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "sample_interval {} exceeds duration {}",
                self.sample_interval, self.duration
            )));
        }
        if !self.initial.is_finite() || !is_finite(&self.camera_position) {
            return Err(Error::invalid("initial state and camera position must be finite"));
        }
        Ok(())
    }

    /// Number of emitted samples, `floor(duration / sample_interval) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_interval + 1e-9).floor() as usize + 1
    }

    /// Sets the duration so that exactly `frames` samples are produced.
    pub fn with_frame_count(mut self, frames: usize) -> Result<Self> {
        if frames < 2 {
            return Err(Error::invalid("at least 2 frames are required"));
        }
        self.duration = (frames - 1) as f64 * self.sample_interval;
        Ok(self)
    }
}

/// `ω̇ = I⁻¹ (N − ω × I·ω)` for diagonal inertia.
pub fn euler_derivative(omega: &Vec3, inertia: &InertiaModel) -> Vec3 {
    let i = inertia.moments();
    let rhs = inertia.torque - omega.cross(&i.component_mul(omega));
    rhs.component_div(&i)
}

fn quat_rate(q: &Quaternion<f64>, omega: &Vec3) -> Quaternion<f64> {
    q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5
}

/// One classical RK4 step of the coupled (attitude, ω) system. Position
/// advances with the constant velocity.
pub fn rk4_step(state: &RigidBodyState, inertia: &InertiaModel, dt: f64) -> Result<RigidBodyState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let q0 = *state.attitude.unit_quaternion().quaternion();
    let w0 = state.omega;

    let k1q = quat_rate(&q0, &w0);
    let k1w = euler_derivative(&w0, inertia);

    let q = q0 + k1q * (0.5 * dt);
    let w = w0 + k1w * (0.5 * dt);
    let k2q = quat_rate(&q, &w);
    let k2w = euler_derivative(&w, inertia);

    let q = q0 + k2q * (0.5 * dt);
    let w = w0 + k2w * (0.5 * dt);
    let k3q = quat_rate(&q, &w);
    let k3w = euler_derivative(&w, inertia);

    let q = q0 + k3q * dt;
    let w = w0 + k3w * dt;
    let k4q = quat_rate(&q, &w);
    let k4w = euler_derivative(&w, inertia);

    let q1 = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
    let w1 = w0 + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0);

    Ok(RigidBodyState {
        attitude: Rotation::from_unit_quaternion(UnitQuaternion::new_normalize(q1)),
        omega: w1,
        position: state.position + state.velocity * dt,
        velocity: state.velocity,
        time: state.time + dt,
    })
}

/// Integrates `config` and returns states at every sample instant,
/// starting with the initial state at t = 0.
pub fn simulate(config: &SimConfig) -> Result<Vec<RigidBodyState>> {
    config.validate()?;
    let n = config.sample_count();
    let substeps = (config.sample_interval / config.integrator_dt - 1e-9).ceil().max(1.0) as usize;
    let dt = config.sample_interval / substeps as f64;

    let mut state = RigidBodyState {
        time: 0.0,
        ..config.initial
    };
    let mut out = Vec::with_capacity(n);
    out.push(state);
    for k in 1..n {
        for _ in 0..substeps {
            state = rk4_step(&state, &config.inertia, dt)?;
        }
        // Pin the sample clock so rounding in the substep sum does not drift.
        state.time = k as f64 * config.sample_interval;
        if !state.is_finite() {
            return Err(Error::Unstable { time: state.time });
        }
        out.push(state);
    }
    Ok(out)
}

/// Inertial-to-camera rotation of a camera at `camera` looking at `target`
/// (optical axis +z, image x to the right, y down).
pub fn look_at(camera: &Vec3, target: &Vec3) -> Rotation {
    let Some(forward) = crate::geom::unit(&(target - camera)) else {
        return Rotation::identity();
    };
    let mut up = Vec3::z();
    if forward.cross(&up).norm() < 1e-6 {
        up = Vec3::y();
    }
    let x = forward.cross(&up).normalize();
    let y = forward.cross(&x);
    let m = nalgebra::Matrix3::from_rows(&[x.transpose(), y.transpose(), forward.transpose()]);
    Rotation::from_matrix(&m).expect("look-at basis is orthonormal")
}

/// Re-expresses a static inertial camera in the moving body frame.
///
/// For each state, the emitted camera center is `Aᵀ(p_cam − p)` and the
/// world-to-camera rotation is `R_ci · A`, where `A` is the body attitude and
/// `R_ci` the fixed camera orientation (looking at the target's initial
/// position).
pub fn to_camera_trajectory(states: &[RigidBodyState], camera_position: &Vec3) -> Result<PoseTrajectory> {
    let first = states
        .first()
        .ok_or_else(|| Error::EmptyInput("no simulator states".into()))?;
    let r_ci = look_at(camera_position, &first.position);
    let poses = states
        .iter()
        .map(|s| {
            let a_inv = s.attitude.inverse();
            Pose::new(
                r_ci.compose(&s.attitude),
                a_inv.rotate(&(camera_position - s.position)),
                s.time,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    PoseTrajectory::new(poses, FrameTag::Metric, "simulator")
}

/// Perturbs every pose with an independent random rotation (uniform axis,
/// angle ~ N(0, σ_rot)) applied on the camera side and an isotropic Gaussian
/// center offset. Deterministic for a given seed.
pub fn inject_pose_noise(
    traj: &PoseTrajectory,
    sigma_rot_deg: f64,
    sigma_trans: f64,
    seed: u64,
) -> Result<PoseTrajectory> {
    if !(sigma_rot_deg >= 0.0 && sigma_trans >= 0.0) {
        return Err(Error::invalid("noise sigmas must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle_dist = Normal::new(0.0, sigma_rot_deg.to_radians()).map_err(|e| Error::invalid(e.to_string()))?;
    let trans_dist = Normal::new(0.0, sigma_trans).map_err(|e| Error::invalid(e.to_string()))?;

    let mut poses = traj.poses().to_vec();
    for p in poses.iter_mut() {
        let axis: [f64; 3] = UnitSphere.sample(&mut rng);
        let angle = angle_dist.sample(&mut rng);
        let offset = Vec3::new(
            trans_dist.sample(&mut rng),
            trans_dist.sample(&mut rng),
            trans_dist.sample(&mut rng),
        );
        if sigma_rot_deg > 0.0 {
            p.rotation = Rotation::exp(&(Vec3::from(axis) * angle)).compose(&p.rotation);
        }
        if sigma_trans > 0.0 {
            p.center += offset;
        }
    }
    let mut out = PoseTrajectory::new(poses, traj.frame_tag, traj.source.clone())?;
    if !traj.names().is_empty() {
        out = out.with_names(traj.names().to_vec())?;
    }
    Ok(out)
}

pub const TRUTH_CSV_HEADER: [&str; 14] = [
    "time_s", "qw", "qx", "qy", "qz", "wx_rad_s", "wy_rad_s", "wz_rad_s", "px_m", "py_m", "pz_m", "vx_m_s", "vy_m_s",
    "vz_m_s",
];

/// Serializes ground-truth states as CSV with 9 significant digits.
pub fn write_truth_csv(states: &[RigidBodyState]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRUTH_CSV_HEADER).map_err(csv_err)?;
    for s in states {
        let q = s.attitude.quaternion();
        let row = [
            s.time,
            q[0],
            q[1],
            q[2],
            q[3],
            s.omega.x,
            s.omega.y,
            s.omega.z,
            s.position.x,
            s.position.y,
            s.position.z,
            s.velocity.x,
            s.velocity.y,
            s.velocity.z,
        ];
        w.write_record(row.iter().map(|v| sig9(*v))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_truth_csv(text: &str) -> Result<Vec<RigidBodyState>> {
    let rows = crate::ingest::csv_rows(text, &TRUTH_CSV_HEADER)?;
    rows.into_iter()
        .map(|r| {
            Ok(RigidBodyState {
                time: r[0],
                attitude: Rotation::from_quaternion(r[1], r[2], r[3], r[4])?,
                omega: Vec3::new(r[5], r[6], r[7]),
                position: Vec3::new(r[8], r[9], r[10]),
                velocity: Vec3::new(r[11], r[12], r[13]),
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}
