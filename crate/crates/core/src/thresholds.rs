//! Reward-threshold calibration from the measured power-ratio model.
//!
//! The tracker scores a move by the ratio of two noisy power measurements.
//! Writing each measurement as `|c + z|^2` and expanding, the ratio is
//! modeled as
//!
//! ```text
//!         x P + eps_1 + zeta_1
//!     Y = --------------------,   X = x is the true power ratio,
//!           P + eps_2 + zeta_2
//! ```
//!
//! with `eps ~ N(0, 2 sigma |c|^2)` for the signal-noise cross term and
//! `zeta ~ Exp(mean sigma)` for the squared noise magnitude, treated as
//! independent. The model tracks the two noise quadratures separately, so
//! the variance `sigma` entering it is twice the per-observation figure for
//! a given SNR. Negative parts are clamped at zero; when clamping affects
//! more than 1% of draws the exact `|c + z|^2` form replaces the expansion.
//!
//! Calibration picks the smallest upper threshold `c_u >= 1` whose misfire
//! probability `P(Y > c_u | X = x)` stays at or below a target for every
//! degraded `x < 1` in a grid, and symmetrically the largest `c_l <= 1` for
//! improvements.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    /// No threshold inside the search range meets the misfire target.
    #[error("no threshold in [{lo}, {hi}] meets the misfire target")]
    Unreachable { lo: f64, hi: f64 },
}

/// Upper-threshold search range.
pub const C_UPPER_RANGE: (f64, f64) = (1.0, 4.0);
/// Lower-threshold search range.
pub const C_LOWER_RANGE: (f64, f64) = (0.25, 1.0);

/// Noise variance of the ratio model at a given SNR: both quadratures of
/// the unit-power observation noise `10^(-snr/10) * signal_power` enter the
/// expansion, doubling the variance.
pub fn noise_variance_for_snr(snr_db: f64, signal_power: f64) -> f64 {
    2.0 * 10f64.powf(-snr_db / 10.0) * signal_power
}

// ── Sampling ────────────────────────────────────────────────────────────────

/// Squared noise magnitude `|z|^2`: exponential with mean `sigma_z_sq`.
fn squared_noise<R: Rng>(sigma_z_sq: f64, rng: &mut R) -> f64 {
    Exp::new(1.0 / sigma_z_sq)
        .expect("positive noise variance")
        .sample(rng)
}

/// One draw of the ratio model, with its parts exposed for moment checks.
#[derive(Clone, Copy, Debug)]
pub struct RatioSample {
    pub y: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub clamped: bool,
}

/// Draws the expanded ratio model. `x` is the true power ratio,
/// `signal_power` the denominator's mean power, `sigma_z_sq` the model
/// noise variance.
pub fn sample_y<R: Rng>(x: f64, signal_power: f64, sigma_z_sq: f64, rng: &mut R) -> RatioSample {
    assert!(x >= 0.0 && signal_power > 0.0 && sigma_z_sq >= 0.0);
    if sigma_z_sq == 0.0 {
        return RatioSample {
            y: x,
            numerator: x * signal_power,
            denominator: signal_power,
            clamped: false,
        };
    }
    let num_cross = Normal::new(0.0, (2.0 * sigma_z_sq * x * signal_power).sqrt()).unwrap();
    let den_cross = Normal::new(0.0, (2.0 * sigma_z_sq * signal_power).sqrt()).unwrap();
    let raw_num = x * signal_power + num_cross.sample(rng) + squared_noise(sigma_z_sq, rng);
    let raw_den = signal_power + den_cross.sample(rng) + squared_noise(sigma_z_sq, rng);
    let clamped = raw_num < 0.0 || raw_den < 0.0;
    let numerator = raw_num.max(0.0);
    let denominator = raw_den.max(f64::EPSILON * signal_power);
    RatioSample {
        y: numerator / denominator,
        numerator,
        denominator,
        clamped,
    }
}

/// Draws the exact ratio `|c_1 + z_1|^2 / |c_2 + z_2|^2` with
/// `c_1 = sqrt(x P)`, `c_2 = sqrt(P)`, `z ~ CN(0, sigma_z_sq)`.
pub fn sample_y_exact<R: Rng>(x: f64, signal_power: f64, sigma_z_sq: f64, rng: &mut R) -> f64 {
    let per_axis = (sigma_z_sq / 2.0).sqrt();
    let normal = Normal::new(0.0, per_axis).expect("nonnegative noise std");
    let c1 = (x * signal_power).sqrt();
    let c2 = signal_power.sqrt();
    let num = (c1 + normal.sample(rng)).powi(2) + normal.sample(rng).powi(2);
    let den = (c2 + normal.sample(rng)).powi(2) + normal.sample(rng).powi(2);
    num / den.max(f64::MIN_POSITIVE)
}

/// `n` ratio draws, switching to the exact form when the expansion clamps
/// more than 1% of them.
fn draw_samples<R: Rng>(
    x: f64,
    sigma_z_sq: f64,
    n: usize,
    rng: &mut R,
) -> (Vec<f64>, f64, bool) {
    let mut ys = Vec::with_capacity(n);
    let mut clamped = 0usize;
    for _ in 0..n {
        let s = sample_y(x, 1.0, sigma_z_sq, rng);
        ys.push(s.y);
        if s.clamped {
            clamped += 1;
        }
    }
    let clamp_rate = clamped as f64 / n as f64;
    if clamp_rate > 0.01 {
        let ys = (0..n)
            .map(|_| sample_y_exact(x, 1.0, sigma_z_sq, rng))
            .collect();
        (ys, clamp_rate, true)
    } else {
        (ys, clamp_rate, false)
    }
}

// ── Misfire probability and calibration ─────────────────────────────────────

/// Monte-Carlo estimate of a threshold exceedance probability.
#[derive(Clone, Copy, Debug)]
pub struct ProbEstimate {
    pub prob: f64,
    pub stderr: f64,
    pub clamp_rate: f64,
    pub used_exact: bool,
}

/// Estimates `P(Y > c | X = x)` at an SNR operating point with unit signal
/// power.
pub fn prob_exceed<R: Rng>(
    x: f64,
    snr_db: f64,
    c: f64,
    n_samples: usize,
    rng: &mut R,
) -> ProbEstimate {
    assert!(n_samples > 0);
    let sigma = noise_variance_for_snr(snr_db, 1.0);
    let (ys, clamp_rate, used_exact) = draw_samples(x, sigma, n_samples, rng);
    let above = ys.iter().filter(|&&y| y > c).count();
    let prob = above as f64 / n_samples as f64;
    ProbEstimate {
        prob,
        stderr: (prob * (1.0 - prob) / n_samples as f64).sqrt(),
        clamp_rate,
        used_exact,
    }
}

/// Calibrated reward thresholds.
#[derive(Clone, Copy, Debug)]
pub struct CalibratedThresholds {
    pub c_upper: f64,
    pub c_lower: f64,
}

/// Smallest value `v` in `sorted` with at most `allowed` samples above it.
fn upper_quantile(sorted: &[f64], allowed: usize) -> f64 {
    sorted[sorted.len() - 1 - allowed.min(sorted.len() - 1)]
}

/// Largest value `v` in `sorted` with at most `allowed` samples below it.
fn lower_quantile(sorted: &[f64], allowed: usize) -> f64 {
    sorted[allowed.min(sorted.len() - 1)]
}

/// Calibrates `(c_upper, c_lower)` so the misfire probability stays at or
/// below `target` for every grid ratio: rewarding a drop
/// (`P(Y > c_upper | x < 1)`) and punishing a gain
/// (`P(Y < c_lower | x > 1)`). Thresholds never cross 1, and calibration
/// fails when the needed threshold leaves the search range.
pub fn calibrate<R: Rng>(
    snr_db: f64,
    target: f64,
    x_grid: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<CalibratedThresholds, ThresholdError> {
    assert!(target > 0.0 && target < 1.0, "target must be a probability");
    assert!(n_samples > 0);
    let sigma = noise_variance_for_snr(snr_db, 1.0);
    let allowed = (target * n_samples as f64).floor() as usize;

    let mut c_upper = C_UPPER_RANGE.0;
    for &x in x_grid.iter().filter(|&&x| x < 1.0) {
        let (mut ys, _, _) = draw_samples(x, sigma, n_samples, rng);
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c_upper = c_upper.max(upper_quantile(&ys, allowed));
    }
    if c_upper > C_UPPER_RANGE.1 {
        return Err(ThresholdError::Unreachable {
            lo: C_UPPER_RANGE.0,
            hi: C_UPPER_RANGE.1,
        });
    }

    let mut c_lower = C_LOWER_RANGE.1;
    for &x in x_grid.iter().filter(|&&x| x > 1.0) {
        let (mut ys, _, _) = draw_samples(x, sigma, n_samples, rng);
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c_lower = c_lower.min(lower_quantile(&ys, allowed));
    }
    if c_lower < C_LOWER_RANGE.0 {
        return Err(ThresholdError::Unreachable {
            lo: C_LOWER_RANGE.0,
            hi: C_LOWER_RANGE.1,
        });
    }

    Ok(CalibratedThresholds { c_upper, c_lower })
}

/// The default calibration ratio grid: degraded and improved ratios in 0.1
/// steps, excluding the no-change point.
pub fn default_x_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (5..10).map(|i| i as f64 / 10.0).collect();
    grid.extend((11..=15).map(|i| i as f64 / 10.0));
    grid
}

// ── Tests ───────────────────────────────────────────────────────────────────
