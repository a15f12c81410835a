//! Monte Carlo tolerance sweeps.
//!
//! For one sensor channel at a time, find the largest bias (or noise
//! standard deviation) magnitude at which at least a target fraction of
//! randomized trials still meets the attitude error budget, by bisecting
//! the magnitude with everything else error-free. Trial randomness —
//! bias sign patterns and noise realizations — derives from the sweep
//! seed, so a sweep is reproducible bit-for-bit.

use crate::corrupt::CorruptionConfig;
use crate::trajectory::TruthSample;
use crate::trial::{run_trial, ErrorReport, EvalConfig};
use ahrs_core::{PipelineConfig, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Which measurement channel the swept magnitude applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptChannel {
    /// Roll-rate gyro axis, rad/s.
    RollRate,
    /// Pitch-rate gyro axis, rad/s.
    PitchRate,
    /// Yaw-rate gyro axis, rad/s.
    YawRate,
    /// All three accelerometer axes, m/s^2.
    Accelerometer,
    /// All three magnetometer axes, gauss.
    Magnetometer,
    /// GPS ground speed, m/s.
    GpsSpeed,
}

impl SweptChannel {
    pub const ALL: [SweptChannel; 6] = [
        SweptChannel::RollRate,
        SweptChannel::PitchRate,
        SweptChannel::YawRate,
        SweptChannel::Accelerometer,
        SweptChannel::Magnetometer,
        SweptChannel::GpsSpeed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweptChannel::RollRate => "roll_rate",
            SweptChannel::PitchRate => "pitch_rate",
            SweptChannel::YawRate => "yaw_rate",
            SweptChannel::Accelerometer => "accelerometer",
            SweptChannel::Magnetometer => "magnetometer",
            SweptChannel::GpsSpeed => "gps_speed",
        }
    }
}

impl fmt::Display for SweptChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the magnitude is a constant bias or a white-noise standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptKind {
    Bias,
    Noise,
}

impl SweptKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweptKind::Bias => "bias",
            SweptKind::Noise => "noise",
        }
    }
}

/// Attitude error budget a trial must stay within, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassCriterion {
    pub max_roll_deg: f64,
    pub max_pitch_deg: f64,
    pub max_yaw_deg: f64,
}

impl Default for PassCriterion {
    fn default() -> Self {
        Self {
            max_roll_deg: 1.0,
            max_pitch_deg: 1.0,
            max_yaw_deg: 4.0,
        }
    }
}

/// One sweep request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub channel: SweptChannel,
    pub kind: SweptKind,
    /// Largest magnitude probed, channel-native SI units.
    pub upper: f64,
    /// Randomized trials per probed magnitude; must be >= 1.
    pub trials: u32,
    /// Fraction of trials that must pass (0.9 by default).
    pub pass_fraction: f64,
    pub criterion: PassCriterion,
    /// Bisection stops when the bracket is below this fraction of
    /// `upper`.
    pub resolution_frac: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(channel: SweptChannel, kind: SweptKind, upper: f64, trials: u32, seed: u64) -> Self {
        Self {
            channel,
            kind,
            upper,
            trials,
            pass_fraction: 0.9,
            criterion: PassCriterion::default(),
            resolution_frac: 0.05,
            seed,
        }
    }
}

/// Result of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Largest probed magnitude meeting the pass fraction.
    pub tolerance: f64,
    /// Pass fraction measured at that magnitude.
    pub pass_fraction_at_tolerance: f64,
    /// Every (magnitude, pass fraction) evaluation, in probe order.
    pub evaluations: Vec<(f64, f64)>,
    /// Set when a smaller magnitude failed while a larger one passed,
    /// i.e. pass/fail was not monotone within the probe resolution.
    pub non_monotone: bool,
}

fn mix_seed(base: u64, trial: u32) -> u64 {
    // SplitMix64 finalizer over (base, trial).
    let mut z = base ^ (u64::from(trial).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Corruption for one trial at the given swept magnitude: the swept
/// channel carries the magnitude (bias signs drawn per trial), every
/// other error source is zero. The 1 s GPS transport delay stays on —
/// it is part of the receiver model, not an error magnitude.
fn trial_corruption(spec: &SweepSpec, magnitude: f64, trial: u32) -> CorruptionConfig {
    let seed = mix_seed(spec.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };

    let mut cfg = CorruptionConfig::pristine(seed.wrapping_add(1));
    cfg.gps_delay_s = 1.0;
    match spec.kind {
        SweptKind::Bias => match spec.channel {
            SweptChannel::RollRate => cfg.gyro_bias_rps.x = sign() * magnitude,
            SweptChannel::PitchRate => cfg.gyro_bias_rps.y = sign() * magnitude,
            SweptChannel::YawRate => cfg.gyro_bias_rps.z = sign() * magnitude,
            SweptChannel::Accelerometer => {
                cfg.accel_bias_mps2 =
                    Vec3::new(sign() * magnitude, sign() * magnitude, sign() * magnitude)
            }
            SweptChannel::Magnetometer => {
                cfg.mag_bias_gauss =
                    Vec3::new(sign() * magnitude, sign() * magnitude, sign() * magnitude)
            }
            SweptChannel::GpsSpeed => cfg.gps_bias_mps = sign() * magnitude,
        },
        SweptKind::Noise => match spec.channel {
            SweptChannel::RollRate | SweptChannel::PitchRate | SweptChannel::YawRate => {
                // Gyro noise is a per-axis magnitude; apply it to the
                // swept axis by zeroing the others through bias-free
                // white noise on all axes of the shared gyro model.
                cfg.gyro_sigma_rps = magnitude;
            }
            SweptChannel::Accelerometer => cfg.accel_sigma_mps2 = magnitude,
            SweptChannel::Magnetometer => cfg.mag_sigma_gauss = magnitude,
            SweptChannel::GpsSpeed => cfg.gps_sigma_mps = magnitude,
        },
    }
    cfg
}

/// Fraction of trials meeting the criterion at one magnitude.
fn pass_fraction(
    spec: &SweepSpec,
    magnitude: f64,
    truth: &[TruthSample],
    pipeline_cfg: &PipelineConfig,
    eval: &EvalConfig,
) -> f64 {
    let mut passed = 0u32;
    for trial in 0..spec.trials {
        let corruption = trial_corruption(spec, magnitude, trial);
        let report: ErrorReport = run_trial(truth, &corruption, pipeline_cfg, eval);
        if report.passes(
            spec.criterion.max_roll_deg,
            spec.criterion.max_pitch_deg,
            spec.criterion.max_yaw_deg,
        ) {
            passed += 1;
        }
    }
    f64::from(passed) / f64::from(spec.trials.max(1))
}

/// Bisect the swept magnitude for the largest value still meeting the
/// pass fraction.
pub fn tolerance_sweep(
    spec: &SweepSpec,
    truth: &[TruthSample],
    pipeline_cfg: &PipelineConfig,
    eval: &EvalConfig,
) -> SweepOutcome {
    assert!(spec.trials >= 1, "at least one trial per point");
    let mut evaluations = Vec::new();
    let mut eval_at = |m: f64| {
        let frac = pass_fraction(spec, m, truth, pipeline_cfg, eval);
        evaluations.push((m, frac));
        frac
    };

    let upper_frac = eval_at(spec.upper);
    if upper_frac >= spec.pass_fraction {
        return SweepOutcome {
            tolerance: spec.upper,
            pass_fraction_at_tolerance: upper_frac,
            evaluations,
            non_monotone: false,
        };
    }

    let zero_frac = eval_at(0.0);
    let mut lo = 0.0;
    let mut lo_frac = zero_frac;
    let mut hi = spec.upper;
    if zero_frac >= spec.pass_fraction {
        let resolution = spec.resolution_frac * spec.upper;
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            let frac = eval_at(mid);
            if frac >= spec.pass_fraction {
                lo = mid;
                lo_frac = frac;
            } else {
                hi = mid;
            }
        }
    }

    // Non-monotonicity: some failing magnitude below a passing one.
    let mut non_monotone = false;
    for &(m1, f1) in &evaluations {
        for &(m2, f2) in &evaluations {
            if m1 < m2 && f1 < spec.pass_fraction && f2 >= spec.pass_fraction {
                non_monotone = true;
            }
        }
    }

    SweepOutcome {
        tolerance: lo,
        pass_fraction_at_tolerance: lo_frac,
        evaluations,
        non_monotone,
    }
}
