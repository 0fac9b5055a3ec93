//! Sinusoid fitting `y ≈ A·sin(ωt + φ) + b` for periodic rate components.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineFit {
    pub amplitude: f64,
    /// rad/s (or rad per unit of the time axis).
    pub angular_frequency: f64,
    /// rad, in (−π, π].
    pub phase: f64,
    pub offset: f64,
    pub rmse_residual: f64,
}

impl SineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.angular_frequency * t + self.phase).sin() + self.offset
    }

    pub fn period(&self) -> f64 {
        period_of(self)
    }
}

pub fn period_of(fit: &SineFit) -> f64 {
    2.0 * std::f64::consts::PI / fit.angular_frequency
}

const MIN_SAMPLES: usize = 8;
const MIN_PERIODS: f64 = 1.5;
const FLAT_VARIANCE: f64 = 1e-15;
/// Spectrum oversampling relative to the natural resolution 2π/T.
const OVERSAMPLE: f64 = 4.0;
const GRID_POINTS: usize = 61;

/// Linear least squares for `(a, c, b)` in `a·sin ωt + c·cos ωt + b`,
/// returning the coefficients and the residual RMSE.
fn linear_fit(times: &[f64], values: &[f64], w: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&t, &y) in times.iter().zip(values) {
        let row = Vector3::new((w * t).sin(), (w * t).cos(), 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata.lu().solve(&aty)?;
    let sse: f64 = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let r = y - (coef.x * (w * t).sin() + coef.y * (w * t).cos() + coef.z);
            r * r
        })
        .sum();
    Some((coef, (sse / times.len() as f64).sqrt()))
}

fn rmse_at(times: &[f64], values: &[f64], w: f64) -> f64 {
    linear_fit(times, values, w).map_or(f64::INFINITY, |(_, r)| r)
}

/// Fits a single sinusoid to `(times, values)`.
///
/// The frequency is seeded from the peak of the discrete spectrum of the
/// mean-removed series, narrowed on a residual grid around the peak and
/// refined by golden-section search; amplitude, phase and offset then follow
/// from linear least squares at the final frequency.
pub fn fit_sine(times: &[f64], values: &[f64]) -> Result<SineFit> {
    if times.len() != values.len() {
        return Err(Error::invalid(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let n = times.len();
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "sine fit needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::invalid("sine fit input contains non-finite values"));
    }
    let (t_min, t_max) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let span = t_max - t_min;
    if !(span > 0.0) {
        return Err(Error::invalid("sample times do not span an interval"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if variance < FLAT_VARIANCE {
        return Err(Error::NoPeriodicity(format!("signal variance {variance:e} is flat")));
    }

    // Spectrum peak up to the Nyquist rate of the mean spacing.
    let resolution = 2.0 * std::f64::consts::PI / span;
    let nyquist = std::f64::consts::PI * (n - 1) as f64 / span;
    let step = resolution / OVERSAMPLE;
    let bins = (nyquist / step).floor() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..=bins {
        let w = k as f64 * step;
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &y) in times.iter().zip(values) {
            let (s, c) = (w * (t - t_min)).sin_cos();
            re += (y - mean) * c;
            im += (y - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power);
        }
    }
    let seed = best.0;
    if seed <= 0.0 {
        return Err(Error::NoPeriodicity("no spectral peak below the Nyquist rate".into()));
    }

    // Residual grid within ±1.5 resolution cells of the peak.
    let lo = (seed - 1.5 * resolution).max(0.25 * step);
    let hi = seed + 1.5 * resolution;
    let dw = (hi - lo) / (GRID_POINTS - 1) as f64;
    let (k_best, _) = (0..GRID_POINTS)
        .map(|k| (k, rmse_at(times, values, lo + k as f64 * dw)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let mut a = (lo + (k_best as f64 - 1.0) * dw).max(0.5 * lo);
    let mut b = lo + (k_best as f64 + 1.0) * dw;

    // Golden-section refinement.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = rmse_at(times, values, x1);
    let mut f2 = rmse_at(times, values, x2);
    for _ in 0..200 {
        if (b - a) <= 1e-15 * b.abs() {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = rmse_at(times, values, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = rmse_at(times, values, x2);
        }
    }
    let w = if f1 <= f2 { x1 } else { x2 };
    if span * w / (2.0 * std::f64::consts::PI) < MIN_PERIODS {
        return Err(Error::NoPeriodicity(format!(
            "data span {span} covers fewer than {MIN_PERIODS} periods of the dominant frequency {w} rad/s"
        )));
    }
    let (coef, rmse_residual) =
        linear_fit(times, values, w).ok_or_else(|| Error::Degenerate("sine design matrix is singular".into()))?;
    let mut phase = coef.y.atan2(coef.x);
    if phase <= -std::f64::consts::PI {
        phase += 2.0 * std::f64::consts::PI;
    }
    Ok(SineFit {
        amplitude: coef.x.hypot(coef.y),
        angular_frequency: w,
        phase,
        offset: coef.z,
        rmse_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(n: usize, span: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        (t, y)
    }

    #[test]
    fn exact_sinusoid_is_recovered() {
        let (t, y) = series(100, 40.0, |t| 2.0 * (0.5 * t + 0.3).sin() + 0.1);
        let fit = fit_sine(&t, &y).unwrap();
        assert!((fit.amplitude - 2.0).abs() < 1e-6);
        assert!((fit.angular_frequency - 0.5).abs() < 1e-6);
        assert!((fit.phase - 0.3).abs() < 1e-6);
        assert!((fit.offset - 0.1).abs() < 1e-6);
        assert!(fit.rmse_residual < 1e-9 * 2.0);
    }

    #[test]
    fn noisy_frequency_within_a_tenth_of_a_percent() {
        let normal = Normal::new(0.0, 0.05).unwrap();
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, mut y) = series(100, 40.0, |t| 2.0 * (0.5 * t + 0.3).sin() + 0.1);
            y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            let fit = fit_sine(&t, &y).unwrap();
            let rel = (fit.angular_frequency - 0.5).abs() / 0.5;
            assert!(rel < 3e-3, "seed {seed}: {rel}");
            total += rel;
        }
        assert!(total / 20.0 < 1e-3);
    }

    #[test]
    fn negative_amplitude_is_folded_into_phase() {
        let (t, y) = series(64, 30.0, |t| -1.5 * (1.1 * t).sin());
        let fit = fit_sine(&t, &y).unwrap();
        assert!((fit.amplitude - 1.5).abs() < 1e-8);
        assert!((fit.phase.abs() - std::f64::consts::PI).abs() < 1e-8);
        assert!(fit.phase > -std::f64::consts::PI);
    }

    #[test]
    fn non_uniform_sampling() {
        let t: Vec<f64> = (0..80).map(|i| i as f64 * 0.5 + 0.2 * ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.7 * (0.9 * t - 1.0).sin() - 0.2).collect();
        let fit = fit_sine(&t, &y).unwrap();
        assert!((fit.angular_frequency - 0.9).abs() < 1e-8);
        assert!((fit.phase + 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_signal_has_no_period() {
        let (t, y) = series(50, 10.0, |_| 3.0);
        assert!(matches!(fit_sine(&t, &y), Err(Error::NoPeriodicity(_))));
    }

    #[test]
    fn too_few_samples_or_periods() {
        let (t, y) = series(7, 40.0, |t| t.sin());
        assert!(matches!(fit_sine(&t, &y), Err(Error::InvalidInput(_))));
        let (t, y) = series(100, 5.0, |t| (0.5 * t).sin());
        assert!(matches!(fit_sine(&t, &y), Err(Error::NoPeriodicity(_))));
    }

    #[test]
    fn periods() {
        let mk = |w| SineFit {
            amplitude: 1.0,
            angular_frequency: w,
            phase: 0.0,
            offset: 0.0,
            rmse_residual: 0.0,
        };
        assert!((period_of(&mk(2.0 * std::f64::consts::PI)) - 1.0).abs() < 1e-15);
        assert!((period_of(&mk(std::f64::consts::PI)) - 2.0).abs() < 1e-15);
        assert!((period_of(&mk(0.0167)) - 376.2).abs() < 0.1);
    }
}
