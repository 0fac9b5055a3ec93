//! Acceptance suite: one line per criterion, non-zero exit on any failure.

// `ensure!(x < limit)` must also fail on NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashMap;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sfm_tumble::config::PipelineConfig;
use sfm_tumble::eval::{evaluate, TruthSeries};
use sfm_tumble::ingest::{colmap, opensfm, ply};
use sfm_tumble::motion::{estimate_motion, fit_sine, period_of, scale_from_known_length, ScaleReference};
use sfm_tumble::pipeline::run_pipeline;
use sfm_tumble::pointcloud::{
    centroid, complete_shape, detect_planes, radius_outlier_removal, voxel_downsample, Plane, Primitive, TargetFrame,
};
use sfm_tumble::sim::{inject_pose_noise, simulate, to_camera_trajectory, InertiaModel, RigidBodyState, SimConfig};
use sfm_tumble::{PointCloud, PoseTrajectory, Rotation, Vec3};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn fail<E: Display>(e: E) -> String {
    e.to_string()
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

// 1 ------------------------------------------------------------------------

fn simulator_conservation() -> Outcome {
    let cfg = SimConfig::tumbling_cubesat();
    let start = Instant::now();
    let states = simulate(&cfg).map_err(fail)?;
    let elapsed = start.elapsed();
    let inertia = cfg.inertia;
    let e0 = inertia.kinetic_energy(&states[0].omega);
    let h0 = inertia.momentum(&states[0].omega).norm();
    let wz0 = states[0].omega.z;
    let (mut de, mut dh, mut dwz) = (0.0f64, 0.0f64, 0.0f64);
    for s in &states {
        de = de.max((inertia.kinetic_energy(&s.omega) - e0).abs() / e0);
        dh = dh.max((inertia.momentum(&s.omega).norm() - h0).abs() / h0);
        dwz = dwz.max((s.omega.z - wz0).abs());
    }
    ensure!(states.len() == 301, "expected 301 samples, got {}", states.len());
    ensure!(de <= 1e-8, "kinetic energy drift {de:e} > 1e-8");
    ensure!(dh <= 1e-8, "momentum drift {dh:e} > 1e-8");
    ensure!(dwz < 1e-9, "omega_z drift {dwz:e} rad/s >= 1e-9");
    ensure!(
        elapsed < Duration::from_secs(5),
        "runtime {:.2} s >= 5 s",
        seconds(elapsed)
    );
    Ok(format!(
        "energy drift {de:.1e}, |I w| drift {dh:.1e}, w_z drift {dwz:.1e} rad/s, {:.3} s",
        seconds(elapsed)
    ))
}

// 2 ------------------------------------------------------------------------

fn symmetric_top_oracle() -> Outcome {
    let cfg = SimConfig::tumbling_cubesat();
    let states = simulate(&cfg).map_err(fail)?;
    let m = cfg.inertia.moments();
    let lambda = (m.z - m.x) / m.x * cfg.initial.omega.z;

    // Least-squares slope of the unwrapped transverse phase.
    let mut phase = Vec::with_capacity(states.len());
    let mut prev = f64::NAN;
    let mut offset = 0.0;
    for s in &states {
        let mut a = s.omega.y.atan2(s.omega.x) + offset;
        if prev.is_finite() {
            while a - prev > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
                offset -= 2.0 * std::f64::consts::PI;
            }
            while a - prev < -std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        phase.push(a);
        prev = a;
    }
    let t: Vec<f64> = states.iter().map(|s| s.time).collect();
    let n = t.len() as f64;
    let (tm, pm) = (t.iter().sum::<f64>() / n, phase.iter().sum::<f64>() / n);
    let slope = t.iter().zip(&phase).map(|(t, p)| (t - tm) * (p - pm)).sum::<f64>()
        / t.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
    let rate_err = (slope - lambda).abs() / lambda.abs();

    let wx: Vec<f64> = states.iter().map(|s| s.omega.x).collect();
    let fit = fit_sine(&t, &wx).map_err(fail)?;
    let true_period = 2.0 * std::f64::consts::PI / lambda.abs();
    let period_err = (period_of(&fit) - true_period).abs() / true_period;

    ensure!(
        rate_err < 1e-4,
        "precession rate error {:.2e} % >= 0.01 %",
        100.0 * rate_err
    );
    ensure!(period_err < 1e-4, "period error {:.2e} % >= 0.01 %", 100.0 * period_err);
    Ok(format!(
        "lambda {:.6} deg/s (measured {:.6}), period {:.4} s vs {:.4} s ({:.1e} %)",
        lambda.to_degrees(),
        slope.to_degrees(),
        period_of(&fit),
        true_period,
        100.0 * period_err
    ))
}

// 3 ------------------------------------------------------------------------

struct RoundTrip {
    speed_err: f64,
    omega_err_deg: f64,
    midpoint_err_deg: f64,
}

fn round_trip(sample_interval: f64) -> Result<RoundTrip, String> {
    let mut cfg = SimConfig::tumbling_cubesat();
    cfg.sample_interval = sample_interval;
    let states = simulate(&cfg).map_err(fail)?;
    let traj = to_camera_trajectory(&states, &cfg.camera_position).map_err(fail)?;
    let est = estimate_motion(&traj, &TargetFrame::identity(), &ScaleReference::metric()).map_err(fail)?;
    let truth = TruthSeries::new(states.clone(), Some(cfg.inertia)).map_err(fail)?;
    let v0 = cfg.initial.velocity.norm();
    let mut out = RoundTrip {
        speed_err: 0.0,
        omega_err_deg: 0.0,
        midpoint_err_deg: 0.0,
    };
    for (k, r) in est.records.iter().enumerate() {
        let (a, b) = (&states[k], &states[k + 1]);
        let mean_rate = a.attitude.inverse().compose(&b.attitude).log() / (b.time - a.time);
        let mid = truth.omega_at(r.t_mid).map_err(fail)?;
        out.speed_err = out.speed_err.max((r.radial_speed.abs() - v0).abs());
        out.omega_err_deg = out.omega_err_deg.max((r.omega - mean_rate).amax().to_degrees());
        out.midpoint_err_deg = out.midpoint_err_deg.max((r.omega - mid).amax().to_degrees());
    }
    Ok(out)
}

fn noiseless_round_trip() -> Outcome {
    let start = Instant::now();
    let a = round_trip(10.0)?;
    let b = round_trip(5.0)?;
    let elapsed = start.elapsed();
    let shrink = a.midpoint_err_deg / b.midpoint_err_deg;
    ensure!(a.speed_err < 1e-6, "speed error {:.2e} m/s >= 1e-6", a.speed_err);
    ensure!(
        a.omega_err_deg < 1e-6,
        "omega error {:.2e} deg/s >= 1e-6",
        a.omega_err_deg
    );
    ensure!(
        (3.6..=4.4).contains(&shrink),
        "midpoint error shrink {shrink:.2} is not ~4"
    );
    ensure!(
        elapsed < Duration::from_secs(10),
        "runtime {:.2} s >= 10 s",
        seconds(elapsed)
    );
    Ok(format!(
        "speed err {:.1e} m/s, omega err {:.1e} deg/s, midpoint err {:.2e} -> {:.2e} deg/s (x{shrink:.2}), {:.3} s",
        a.speed_err,
        a.omega_err_deg,
        a.midpoint_err_deg,
        b.midpoint_err_deg,
        seconds(elapsed)
    ))
}

// 4 ------------------------------------------------------------------------

fn noisy_robustness() -> Outcome {
    let cfg = SimConfig::tumbling_cubesat();
    let states = simulate(&cfg).map_err(fail)?;
    let clean = to_camera_trajectory(&states, &cfg.camera_position).map_err(fail)?;
    let truth = TruthSeries::new(states, Some(cfg.inertia)).map_err(fail)?;
    let seeds = 10;
    let (mut rmse, mut px, mut py) = (0.0, 0.0, 0.0);
    for seed in 0..seeds {
        let noisy = inject_pose_noise(&clean, 0.05, 0.002, seed).map_err(fail)?;
        let est = estimate_motion(&noisy, &TargetFrame::identity(), &ScaleReference::metric()).map_err(fail)?;
        let rep = evaluate(&est, &truth, &Rotation::identity()).map_err(fail)?;
        let r = rep.omega_rmse_deg_s;
        rmse += r.x.max(r.y).max(r.z);
        let (x, y) = match (rep.period_s.x, rep.period_s.y) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(format!("seed {seed}: transverse sine fit missing")),
        };
        px += x.relative_error_pct;
        py += y.relative_error_pct;
    }
    let n = seeds as f64;
    let (rmse, px, py) = (rmse / n, px / n, py / n);
    ensure!(rmse < 0.02, "mean omega RMSE {rmse:.4} deg/s >= 0.02");
    ensure!(
        px < 0.05 && py < 0.05,
        "period error x {px:.4} %, y {py:.4} % (limit 0.05 %)"
    );
    Ok(format!(
        "omega RMSE {rmse:.4} deg/s (< 0.02), period error x {px:.4} % y {py:.4} % (< 0.05 %), {seeds} seeds"
    ))
}

// 5 ------------------------------------------------------------------------

const EDGE_M: f64 = 0.06;

struct Planar {
    speed_err: f64,
    angular_err: f64,
}

fn planar_case(clean: &PoseTrajectory, gauge: &Rotation, units: f64, noise: Option<u64>) -> Result<Planar, String> {
    let traj = match noise {
        Some(seed) => inject_pose_noise(clean, 0.05, 0.002, seed).map_err(fail)?,
        None => clean.clone(),
    };
    let a = gauge.rotate(&Vec3::new(-0.5, -0.5, -0.5)) * EDGE_M * units;
    let b = gauge.rotate(&Vec3::new(0.5, -0.5, -0.5)) * EDGE_M * units;
    let scale = scale_from_known_length(&a, &b, EDGE_M).map_err(fail)?;
    let frame = TargetFrame {
        origin: Vec3::zeros(),
        axes: *gauge,
    };
    let est = estimate_motion(&traj, &frame, &scale).map_err(fail)?;
    let n = est.records.len() as f64;
    let speed = est.records.iter().map(|r| r.radial_speed.abs()).sum::<f64>() / n;
    let spin = est.records.iter().map(|r| r.omega.norm().to_degrees()).sum::<f64>() / n;
    Ok(Planar {
        speed_err: (speed - 0.05).abs() / 0.05,
        angular_err: (spin - 20.0).abs() / 20.0,
    })
}

fn planar_scenario() -> Outcome {
    let fps = 30.0;
    let cfg = SimConfig {
        initial: RigidBodyState {
            omega: Vec3::new(0.0, 0.0, 20f64.to_radians()),
            velocity: Vec3::new(0.05, 0.0, 0.0),
            ..RigidBodyState::at_rest()
        },
        inertia: InertiaModel::new(1.0, 1.0, 1.0).map_err(fail)?,
        duration: 7.0,
        integrator_dt: 1.0 / fps,
        sample_interval: 1.0 / fps,
        camera_position: Vec3::new(1.0, 0.0, 0.0),
    };
    let states = simulate(&cfg).map_err(fail)?;
    ensure!(states.len() == 211, "expected 211 frames, got {}", states.len());
    let gauge = Rotation::exp(&Vec3::new(0.3, -1.1, 0.7));
    let units = 1.0 / EDGE_M;
    let clean = to_camera_trajectory(&states, &cfg.camera_position)
        .and_then(|t| t.transform_world(&gauge, units))
        .map_err(fail)?;

    let exact = planar_case(&clean, &gauge, units, None)?;
    ensure!(
        exact.speed_err < 1e-9 && exact.angular_err < 1e-9,
        "noiseless relative errors {:.1e} / {:.1e} exceed 1e-9",
        exact.speed_err,
        exact.angular_err
    );
    let seeds = 10;
    let (mut lin, mut ang) = (0.0, 0.0);
    for seed in 0..seeds {
        let p = planar_case(&clean, &gauge, units, Some(seed))?;
        lin += p.speed_err;
        ang += p.angular_err;
    }
    let (lin, ang) = (100.0 * lin / seeds as f64, 100.0 * ang / seeds as f64);
    ensure!(lin <= 5.0, "linear speed error {lin:.2} % > 5 %");
    ensure!(ang <= 2.3, "angular speed error {ang:.2} % > 2.3 %");
    Ok(format!(
        "noiseless {:.1e}/{:.1e}; noisy linear {lin:.3} % (<= 5 %), angular {ang:.3} % (<= 2.3 %)",
        exact.speed_err, exact.angular_err
    ))
}

// 6 ------------------------------------------------------------------------

fn brute_ror(points: &[Vec3], radius: f64, k: usize) -> Vec<Vec3> {
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, q)| j != i && (*q - *p).norm_squared() <= r2)
                .count()
                >= k
        })
        .map(|(_, p)| *p)
        .collect()
}

fn brute_voxel(points: &[Vec3], size: f64) -> Vec<Vec3> {
    let lo = points.iter().fold(Vec3::from_element(f64::INFINITY), |a, p| a.inf(p));
    let mut buckets: HashMap<(i64, i64, i64), (Vec3, usize)> = HashMap::new();
    for p in points {
        let key = (
            ((p.x - lo.x) / size).floor() as i64,
            ((p.y - lo.y) / size).floor() as i64,
            ((p.z - lo.z) / size).floor() as i64,
        );
        let e = buckets.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    buckets.values().map(|(s, n)| s / *n as f64).collect()
}

fn sorted(mut v: Vec<Vec3>) -> Vec<[u64; 3]> {
    let mut keys: Vec<[u64; 3]> = v
        .drain(..)
        .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
        .collect();
    keys.sort_unstable();
    keys
}

fn filter_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut total = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=2000);
        let extent = rng.random_range(0.5..5.0);
        let mut points: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                )
            })
            .collect();
        // Exact duplicates and boundary-distance pairs.
        for i in 0..n / 50 {
            let p = points[i];
            points.push(p);
        }
        total += points.len();
        let cloud = PointCloud::new(points.clone());
        let radius = rng.random_range(0.02..0.6);
        let k = rng.random_range(1..=6);
        let fast = radius_outlier_removal(&cloud, radius, k).map_err(fail)?;
        ensure!(
            fast.points == brute_ror(&points, radius, k),
            "case {case}: radius outlier removal differs from brute force"
        );
        let size = rng.random_range(0.05..1.0);
        let fast = voxel_downsample(&cloud, size).map_err(fail)?;
        ensure!(
            sorted(fast.points) == sorted(brute_voxel(&points, size)),
            "case {case}: voxel down-sampling differs from bucket oracle"
        );
    }
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(30),
        "runtime {:.2} s >= 30 s",
        seconds(elapsed)
    );
    Ok(format!(
        "200 clouds ({total} points) identical to oracles, {:.2} s",
        seconds(elapsed)
    ))
}

// 7 ------------------------------------------------------------------------

struct CubeFixture {
    cloud: PointCloud,
    /// (outward unit normal, face center, indices of face points).
    faces: Vec<(Vec3, Vec3, Vec<usize>)>,
    center: Vec3,
}

/// Unit-edge cube with `per_face` uniform points per face, Gaussian noise
/// `sigma`, `outlier_fraction` of the final cloud uniform in a padded box,
/// optionally with one face removed.
fn cube_fixture(
    per_face: usize,
    sigma: f64,
    outlier_fraction: f64,
    drop_face: Option<usize>,
    seed: u64,
) -> CubeFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    let rot = Rotation::exp(&Vec3::new(0.4, -0.2, 0.9));
    let center = Vec3::new(1.0, 2.0, -0.5);
    let mut points = Vec::new();
    let mut faces = Vec::new();
    for face in 0..6 {
        if Some(face) == drop_face {
            continue;
        }
        let k = face / 2;
        let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
        let mut local_n = Vec3::zeros();
        local_n[k] = sign;
        let mut idx = Vec::new();
        for _ in 0..per_face {
            let mut p = Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            p[k] = 0.5 * sign;
            if sigma > 0.0 {
                p += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            idx.push(points.len());
            points.push(rot.rotate(&p) + center);
        }
        faces.push((rot.rotate(&local_n), rot.rotate(&(local_n * 0.5)) + center, idx));
    }
    let outliers = (points.len() as f64 * outlier_fraction / (1.0 - outlier_fraction)).round() as usize;
    for _ in 0..outliers {
        let p = Vec3::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        );
        points.push(rot.rotate(&p) + center);
    }
    CubeFixture {
        cloud: PointCloud::new(points),
        faces,
        center,
    }
}

fn same_planes(a: &[Plane], b: &[Plane]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.normal == y.normal && x.offset.to_bits() == y.offset.to_bits() && x.inliers == y.inliers)
}

fn ransac_cube() -> Outcome {
    let fx = cube_fixture(2000, 0.002, 0.05, None, 7);
    let threshold = 0.008;
    let detect = || detect_planes(&fx.cloud, 6, threshold, 0.05, 1000, 42);
    let planes = detect().map_err(fail)?;
    ensure!(planes.len() == 6, "detected {} planes", planes.len());

    let tol = 1f64.to_radians().sin();
    let mut worst = 0.0f64;
    for i in 0..6 {
        for j in i + 1..6 {
            let d = planes[i].normal.dot(&planes[j].normal).abs();
            // Opposite faces may come out parallel or antiparallel.
            let dev = d.min((1.0 - d * d).max(0.0).sqrt());
            ensure!(
                dev <= tol,
                "planes {i} and {j} are neither orthogonal nor parallel (|dot| {d:.4})"
            );
            worst = worst.max(dev);
        }
    }

    let mut min_fraction = 1.0f64;
    for (normal, face_center, idx) in &fx.faces {
        let plane = planes
            .iter()
            .filter(|p| p.normal.dot(normal).abs() > 1f64.to_radians().cos())
            .min_by(|a, b| {
                a.signed_distance(face_center)
                    .abs()
                    .total_cmp(&b.signed_distance(face_center).abs())
            })
            .ok_or("a cube face has no matching plane")?;
        let hits = idx
            .iter()
            .filter(|&&i| plane.signed_distance(&fx.cloud.points[i]).abs() <= threshold)
            .count();
        min_fraction = min_fraction.min(hits as f64 / idx.len() as f64);
    }
    ensure!(
        min_fraction >= 0.99,
        "only {:.2} % of a face's points are inliers",
        100.0 * min_fraction
    );

    let again = detect().map_err(fail)?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(fail)?
        .install(detect)
        .map_err(fail)?;
    ensure!(same_planes(&planes, &again), "second run differs");
    ensure!(same_planes(&planes, &single), "single-threaded run differs");
    Ok(format!(
        "6 planes, worst normal deviation {:.3} deg, min face inlier share {:.2} %, reproducible across runs and thread counts",
        worst.asin().to_degrees(),
        100.0 * min_fraction
    ))
}

// 8 ------------------------------------------------------------------------

fn damaged_cube() -> Outcome {
    let fx = cube_fixture(1500, 0.001, 0.0, Some(0), 8);
    let before = (centroid(&fx.cloud).map_err(fail)? - fx.center).norm();
    let planes = detect_planes(&fx.cloud, 6, 0.004, 0.05, 1000, 3).map_err(fail)?;
    let done = complete_shape(&fx.cloud, Primitive::Cube, &planes).map_err(fail)?;
    let after = (centroid(&done).map_err(fail)? - fx.center).norm();
    ensure!(
        before >= 0.05,
        "damaged centroid error {:.2} % is below 5 %",
        100.0 * before
    );
    ensure!(after <= 0.02, "completed centroid error {:.2} % > 2 %", 100.0 * after);
    Ok(format!(
        "centroid error {:.2} % -> {:.2} % of edge ({} planes, {} points added)",
        100.0 * before,
        100.0 * after,
        planes.len(),
        done.len() - fx.cloud.len()
    ))
}

// 9 ------------------------------------------------------------------------

const JSON_FIXTURE: &[u8] = include_bytes!("fixtures/reconstruction.json");
const IMAGES_FIXTURE: &[u8] = include_bytes!("fixtures/images.txt");
const POINTS_FIXTURE: &[u8] = include_bytes!("fixtures/points3D.txt");
const PLY_FIXTURE: &[u8] = include_bytes!("fixtures/cloud.ply");

fn check_golden_trajectory(traj: &PoseTrajectory, dialect: &str) -> Result<(), String> {
    let expected = [
        Vec3::new(0.0, 0.0, 5.0),
        Vec3::new(-2.0, 1.0, -3.0),
        Vec3::new(0.0, 1.0, 2.0),
    ];
    ensure!(traj.len() == 3, "{dialect}: {} poses", traj.len());
    for (i, (p, c)) in traj.poses().iter().zip(&expected).enumerate() {
        ensure!(
            (p.center - c).norm() < 1e-9,
            "{dialect}: pose {i} center {:?} != {:?}",
            p.center,
            c
        );
        let residual = (p.rotation.rotate(&p.center) + p.translation()).norm();
        ensure!(residual < 1e-9, "{dialect}: pose {i} R c + t = {residual:e}");
    }
    Ok(())
}

fn mutate(rng: &mut ChaCha8Rng, input: &[u8]) -> Vec<u8> {
    const TOKENS: [&[u8]; 12] = [
        b"-1",
        b"nan",
        b"1e309",
        b"{",
        b"]",
        b"\n",
        b"\"",
        b" ",
        b"999999999999",
        b"property list uchar int x\n",
        b"element vertex 4294967295\n",
        b"0.7071067811865476",
    ];
    let mut v = input.to_vec();
    for _ in 0..rng.random_range(1..=8) {
        let len = v.len();
        match rng.random_range(0..6) {
            0 if len > 0 => {
                let i = rng.random_range(0..len);
                v[i] = rng.random();
            }
            1 => {
                let i = rng.random_range(0..=len);
                v.insert(i, rng.random());
            }
            2 if len > 0 => {
                let i = rng.random_range(0..len);
                let j = rng.random_range(i..=len.min(i + 16));
                v.drain(i..j);
            }
            3 if len > 0 => {
                let i = rng.random_range(0..len);
                let j = rng.random_range(i..=len.min(i + 32));
                let chunk = v[i..j].to_vec();
                let at = rng.random_range(0..=len);
                v.splice(at..at, chunk);
            }
            4 => v.truncate(rng.random_range(0..=len)),
            _ => {
                let t = TOKENS[rng.random_range(0..TOKENS.len())];
                let at = rng.random_range(0..=len);
                v.splice(at..at, t.iter().copied());
            }
        }
    }
    v
}

fn parser_golden_files() -> Outcome {
    let rec = opensfm::parse_reconstruction_json(JSON_FIXTURE).map_err(fail)?;
    check_golden_trajectory(&rec.trajectory, "reconstruction json")?;
    ensure!(rec.cloud.len() == 4, "json cloud has {} points", rec.cloud.len());
    let rec = colmap::parse_colmap_text(IMAGES_FIXTURE, POINTS_FIXTURE).map_err(fail)?;
    check_golden_trajectory(&rec.trajectory, "images/points3D text")?;
    ensure!(rec.cloud.len() == 2, "text cloud has {} points", rec.cloud.len());

    let cloud = ply::read_ply(PLY_FIXTURE).map_err(fail)?;
    let written = ply::write_ply(&cloud);
    ensure!(written == PLY_FIXTURE, "PLY writer output differs from the golden file");
    ensure!(
        ply::read_ply(&written).map_err(fail)? == cloud,
        "PLY write/read is not the identity"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut parsed, mut rejected, mut crashed) = (0usize, 0usize, 0usize);
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..100_000 {
        let ok = match i % 4 {
            0 => {
                let m = mutate(&mut rng, JSON_FIXTURE);
                catch_unwind(|| opensfm::parse_reconstruction_json(&m).is_ok())
            }
            1 => {
                let m = mutate(&mut rng, IMAGES_FIXTURE);
                catch_unwind(|| colmap::parse_colmap_text(&m, POINTS_FIXTURE).is_ok())
            }
            2 => {
                let m = mutate(&mut rng, POINTS_FIXTURE);
                catch_unwind(|| colmap::parse_colmap_text(IMAGES_FIXTURE, &m).is_ok())
            }
            _ => {
                let m = mutate(&mut rng, PLY_FIXTURE);
                catch_unwind(|| ply::read_ply(&m).is_ok())
            }
        };
        match ok {
            Ok(true) => parsed += 1,
            Ok(false) => rejected += 1,
            Err(_) => crashed += 1,
        }
    }
    std::panic::set_hook(hook);
    ensure!(crashed == 0, "{crashed} of 100000 mutated inputs crashed a parser");
    Ok(format!(
        "golden poses match, PLY byte-identical; fuzz 100000 mutations: {parsed} parsed, {rejected} rejected, 0 crashes"
    ))
}

// 10 -----------------------------------------------------------------------

fn snapshot(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.push((name, std::fs::read(&path).map_err(fail)?));
    }
    files.sort();
    Ok(files)
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let text = format!(
        "seed = 11\noutput_dir = {:?}\n\n[simulate]\nnoise_rot_deg = 0.05\nnoise_trans = 0.002\ncloud_noise_m = 0.0005\n\n[conditioning]\ncomplete = \"cube\"\n",
        dir.path().join("out")
    );
    let cfg = PipelineConfig::from_toml(&text).map_err(fail)?;
    run_pipeline(&cfg).map_err(fail)?;
    let first = snapshot(&cfg.output_dir)?;
    run_pipeline(&cfg).map_err(fail)?;
    let second = snapshot(&cfg.output_dir)?;
    ensure!(first.len() >= 9, "only {} artifacts written", first.len());
    for ((na, a), (nb, b)) in first.iter().zip(&second) {
        ensure!(na == nb, "artifact sets differ: {na} vs {nb}");
        ensure!(a == b, "{na} differs between runs");
    }
    ensure!(first.len() == second.len(), "artifact counts differ");
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} artifacts ({bytes} bytes) byte-identical across two runs",
        first.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("simulator conservation", simulator_conservation),
        ("symmetric-top analytic oracle", symmetric_top_oracle),
        ("noiseless end-to-end round trip", noiseless_round_trip),
        ("noisy robustness", noisy_robustness),
        ("planar 30 fps scenario", planar_scenario),
        ("point-cloud oracle equivalence", filter_oracles),
        ("RANSAC cube", ransac_cube),
        ("damaged-cube centroid", damaged_cube),
        ("parser golden files and fuzzing", parser_golden_files),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = seconds(start.elapsed());
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{took:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{took:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
