//! Sensor corruption models.
//!
//! Each sensor channel gets a constant per-run bias plus noise: white
//! Gaussian noise on the gyros and magnetometers, high-pass-filtered
//! ("colored", vibration-like) Gaussian noise on the accelerometers.
//! GPS speed is delivered at 1 Hz carrying the value measured
//! `gps_delay_s` earlier, with its own bias and white noise. Everything
//! is driven by one seeded stream, so identical configurations produce
//! bit-identical sensor logs.

use crate::trajectory::TruthSample;
use ahrs_core::{SensorFrame, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// GPS delivery cadence, Hz. Fixed by the receiver, not swept.
const GPS_RATE_HZ: f64 = 1.0;

/// Seed of the canonical evaluation scenario: a representative
/// mid-magnitude draw of the typical MEMS bias pattern.
pub const CANONICAL_SEED: u64 = 9;

/// A windowed multiplicative disturbance of the magnetic field
/// magnitude, standing in for flying near a ferrous structure; used to
/// exercise the magnetometer-reliability skip branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagAnomaly {
    pub start_s: f64,
    pub end_s: f64,
    /// Field magnitude multiplier inside the window.
    pub gain: f64,
}

/// Bias and noise magnitudes for every sensor channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionConfig {
    pub gyro_bias_rps: Vec3,
    pub gyro_sigma_rps: f64,
    pub accel_bias_mps2: Vec3,
    pub accel_sigma_mps2: f64,
    /// High-pass corner of the accelerometer noise shaping, Hz; the
    /// output standard deviation still equals `accel_sigma_mps2`.
    pub accel_color_hz: f64,
    pub mag_bias_gauss: Vec3,
    pub mag_sigma_gauss: f64,
    pub gps_bias_mps: f64,
    pub gps_sigma_mps: f64,
    /// Transport delay of the GPS speed, seconds.
    pub gps_delay_s: f64,
    pub mag_anomaly: Option<MagAnomaly>,
    pub seed: u64,
}

impl CorruptionConfig {
    /// No corruption at all: frames equal truth, GPS without delay.
    pub fn pristine(seed: u64) -> Self {
        Self {
            gyro_bias_rps: Vec3::ZERO,
            gyro_sigma_rps: 0.0,
            accel_bias_mps2: Vec3::ZERO,
            accel_sigma_mps2: 0.0,
            accel_color_hz: 20.0,
            mag_bias_gauss: Vec3::ZERO,
            mag_sigma_gauss: 0.0,
            gps_bias_mps: 0.0,
            gps_sigma_mps: 0.0,
            gps_delay_s: 0.0,
            mag_anomaly: None,
            seed,
        }
    }

    /// Typical MEMS-grade sensor errors: per-axis biases drawn once per
    /// run from zero-mean Gaussians and truncated to the datasheet
    /// ranges (3 deg/s gyro, 0.05 m/s^2 accelerometer, 4 mG
    /// magnetometer, 0.5 m/s GPS speed; sigma = half the range), white
    /// noise of 1 deg/s on the gyros and 1.25 mG on the magnetometers,
    /// 0.009 m/s^2 colored accelerometer noise, and 1.5 m/s GPS speed
    /// noise delivered one second late. The canonical evaluation flight
    /// also includes a brief magnetic-field disturbance timed over its
    /// steep-turn segment.
    pub fn typical_mems(seed: u64) -> Self {
        let d = 1.0_f64.to_radians();
        // The bias draw stream is decoupled from the noise stream so
        // the same bias pattern can be replayed with different noise.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00B1_A5ED);
        let mut draw = |range: f64| {
            let gauss = Normal::new(0.0, range / 2.0).expect("normal");
            Distribution::sample(&gauss, &mut rng).clamp(-range, range)
        };
        let gyro_bias_rps = Vec3::new(draw(3.0 * d), draw(3.0 * d), draw(3.0 * d));
        let accel_bias_mps2 = Vec3::new(draw(0.05), draw(0.05), draw(0.05));
        let mag_bias_gauss = Vec3::new(draw(0.004), draw(0.004), draw(0.004));
        let gps_bias_mps = draw(0.5);
        Self {
            gyro_bias_rps,
            gyro_sigma_rps: d,
            accel_bias_mps2,
            accel_sigma_mps2: 0.009,
            accel_color_hz: 20.0,
            mag_bias_gauss,
            mag_sigma_gauss: 0.00125,
            gps_bias_mps,
            gps_sigma_mps: 1.5,
            gps_delay_s: 1.0,
            mag_anomaly: Some(MagAnomaly {
                start_s: 515.0,
                end_s: 521.0,
                gain: 1.5,
            }),
            seed,
        }
    }
}

/// First-order high-pass shaping of a white sequence, rescaled so the
/// output variance equals the input variance.
struct HighPass {
    alpha: f64,
    scale: f64,
    prev_in: Vec3,
    prev_out: Vec3,
    primed: bool,
}

impl HighPass {
    fn new(corner_hz: f64, dt: f64) -> Self {
        let tau = 1.0 / (2.0 * std::f64::consts::PI * corner_hz);
        let alpha = tau / (tau + dt);
        // Stationary output variance of y_k = a(y_{k-1} + x_k - x_{k-1})
        // driven by unit white noise is 2 a^2 / (1 + a).
        let gain = (2.0 * alpha * alpha / (1.0 + alpha)).sqrt();
        Self {
            alpha,
            scale: 1.0 / gain,
            prev_in: Vec3::ZERO,
            prev_out: Vec3::ZERO,
            primed: false,
        }
    }

    fn update(&mut self, input: Vec3) -> Vec3 {
        if !self.primed {
            self.primed = true;
            self.prev_in = input;
            self.prev_out = Vec3::ZERO;
            return Vec3::ZERO;
        }
        let out = (self.prev_out + input - self.prev_in) * self.alpha;
        self.prev_in = input;
        self.prev_out = out;
        out * self.scale
    }
}

/// Corrupt a truth stream into sensor frames.
pub fn corrupt(truth: &[TruthSample], cfg: &CorruptionConfig) -> Vec<SensorFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let dt = if truth.len() >= 2 {
        truth[1].t - truth[0].t
    } else {
        0.01
    };
    let mut highpass = HighPass::new(cfg.accel_color_hz.max(1e-3), dt);
    let gps_period = 1.0 / GPS_RATE_HZ;

    let mut frames = Vec::with_capacity(truth.len());
    let mut last_delivery: Option<f64> = None;

    for sample in truth {
        let draw3 = |rng: &mut ChaCha8Rng| {
            Vec3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng))
        };

        let gyro = sample.omega + cfg.gyro_bias_rps + draw3(&mut rng) * cfg.gyro_sigma_rps;
        let mag_field = match cfg.mag_anomaly {
            Some(a) if sample.t >= a.start_s && sample.t < a.end_s => sample.mag_body * a.gain,
            _ => sample.mag_body,
        };
        let mag = mag_field + cfg.mag_bias_gauss + draw3(&mut rng) * cfg.mag_sigma_gauss;
        let colored = highpass.update(draw3(&mut rng));
        let accel = sample.accel_body + cfg.accel_bias_mps2 + colored * cfg.accel_sigma_mps2;

        // Delivery on the 1 Hz grid once the delayed measurement exists.
        let on_grid = {
            let k = (sample.t / gps_period).round();
            (sample.t - k * gps_period).abs() < dt / 2.0
        };
        let gps_speed = if on_grid && sample.t >= cfg.gps_delay_s {
            let measured_at = sample.t - cfg.gps_delay_s;
            let idx = ((measured_at - truth[0].t) / dt).round() as usize;
            let u = truth[idx.min(truth.len() - 1)].speed_mps;
            last_delivery = Some(sample.t);
            Some(u + cfg.gps_bias_mps + unit.sample(&mut rng) * cfg.gps_sigma_mps)
        } else {
            None
        };
        let gps_age = match last_delivery {
            Some(at) => sample.t - at,
            None => sample.t + gps_period,
        };

        frames.push(SensorFrame {
            t: sample.t,
            gyro,
            accel,
            mag,
            gps_speed,
            gps_age,
        });
    }
    frames
}
