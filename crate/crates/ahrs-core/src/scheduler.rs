//! Frame-by-frame estimation pipeline.
//!
//! Propagation runs on every sensor frame (nominally 100 Hz); the
//! correction runs when a frame carries a fresh GPS speed sample
//! (nominally 1 Hz) and the reliability criteria accept the vector
//! pairs. The pipeline owns the accelerometer low-pass state, the
//! alignment of the initial attitude from the first usable vector fix,
//! and the dispatch between the two estimator backends.

use crate::attitude::Quaternion;
use crate::ekf;
use crate::triad::{
    observe, select_pairs, subtract_centrifugal, triad_dcm, LowPassFilter, MagneticReference,
    PairSelection, TriadError, TriadPair,
};
use crate::ukf::{self, FilterError, FilterState, NoiseCovariances, UkfParams};
use crate::vec3::Vec3;
use std::fmt;

/// One timestamped record of the sensor suite.
///
/// `gps_speed` is present only on frames where a (possibly delayed) GPS
/// sample is delivered; `gps_age` is the time since the most recent
/// delivery, zero on delivery frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    /// Timestamp, seconds, strictly increasing within a log.
    pub t: f64,
    /// Angular rates, rad/s.
    pub gyro: Vec3,
    /// Specific force, m/s^2.
    pub accel: Vec3,
    /// Magnetic field, gauss.
    pub mag: Vec3,
    /// Ground speed, m/s, when a GPS sample is delivered on this frame.
    pub gps_speed: Option<f64>,
    /// Seconds since the last GPS delivery; >= 0.
    pub gps_age: f64,
}

/// Why a correction opportunity was not taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Magnetometer magnitude far from the reference field.
    MagUnreliable,
    /// Acceleration magnitude far from 1 g.
    Acrobatic,
    /// Vector pairs were parallel; no attitude information.
    DegeneratePair,
    /// Innovation covariance not invertible; a-priori state kept.
    SingularInnovation,
    /// Covariance factorization failed during the update.
    NumericalFailure,
}

impl SkipReason {
    /// Stable identifier used in output logs.
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::MagUnreliable => "mag_unreliable",
            SkipReason::Acrobatic => "acrobatic",
            SkipReason::DegeneratePair => "degenerate_pair",
            SkipReason::SingularInnovation => "singular_innovation",
            SkipReason::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which vector pair led the fix used by a correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionKind {
    GravityFirst,
    MagneticFirst,
}

/// What the pipeline did with one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    /// Time update only.
    Propagate,
    /// Time update plus a measurement update.
    PropagateAndCorrect(CorrectionKind),
    /// Time update; a correction was due but skipped.
    PropagateSkipCorrection(SkipReason),
}

/// A frame the pipeline refused to process; the caller should log it
/// and continue with the next frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameError {
    NonMonotonicTimestamp { t: f64, previous: f64 },
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::NonMonotonicTimestamp { t, previous } => write!(
                f,
                "timestamp {t} s is not after the previous frame at {previous} s"
            ),
        }
    }
}

impl std::error::Error for FrameError {}

/// Which estimator backend runs behind the shared models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Ukf,
    Ekf,
}

/// Everything the pipeline needs to run one flight.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub estimator: EstimatorKind,
    pub params: UkfParams,
    pub noise: NoiseCovariances,
    /// Local Earth magnetic field in NED, gauss.
    pub mag_ref: MagneticReference,
    /// Local gravity magnitude, m/s^2.
    pub gravity_mps2: f64,
    /// Accelerometer low-pass corner frequency, Hz.
    pub lowpass_cutoff_hz: f64,
    /// Nominal sensor sample rate, Hz.
    pub sample_rate_hz: f64,
    /// A GPS sample older than this is considered stale and performs no
    /// correction.
    pub gps_max_age_s: f64,
    /// Time constant for smoothing the delivered ground speed across
    /// GPS ticks, seconds; 0 disables smoothing. The speed feeds the
    /// centripetal correction multiplied by the turn rate, so receiver
    /// noise on it directly tilts the gravity observation during turns.
    pub gps_smoothing_tau_s: f64,
    /// Observation-covariance multiplier applied when the magnetic
    /// pair leads the fix. With the magnetometer first, its bias maps
    /// one-for-one into every observed term, so those fixes are
    /// weighted down relative to gravity-led ones.
    pub mag_primary_r_scale: f64,
    /// Prior variance on each quaternion state.
    pub initial_quat_var: f64,
    /// Prior standard deviation on each gyro bias state, rad/s.
    pub initial_bias_std_rps: f64,
}

impl PipelineConfig {
    /// Defaults for a 100 Hz MEMS suite with 1 Hz GPS.
    pub fn new(estimator: EstimatorKind, mag_ref: MagneticReference) -> Self {
        Self {
            estimator,
            params: UkfParams::default(),
            noise: NoiseCovariances::default(),
            mag_ref,
            gravity_mps2: 9.81,
            lowpass_cutoff_hz: 1.5,
            sample_rate_hz: 100.0,
            gps_max_age_s: 1.0,
            gps_smoothing_tau_s: 30.0,
            mag_primary_r_scale: 6.0,
            initial_quat_var: 1e-2,
            initial_bias_std_rps: 5.0_f64.to_radians(),
        }
    }
}

/// Sequential estimation pipeline over a sensor-frame stream.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    /// All three observation inputs pass through identical low-pass
    /// filters: the centripetal term subtracted from the filtered
    /// accelerometer must be phase-consistent with it, and a uniform
    /// group delay across accelerometer, rates and magnetometer lets
    /// the vector fix be advanced to "now" in one step.
    accel_lowpass: LowPassFilter,
    rate_lowpass: LowPassFilter,
    mag_lowpass: LowPassFilter,
    state: Option<FilterState>,
    last_t: Option<f64>,
    /// Rates are held constant over the interval *following* their
    /// sample, so propagation to this frame uses the previous frame's
    /// gyro.
    last_gyro: Vec3,
    /// Recent raw gyro samples (rate, interval) covering at least one
    /// filter group delay, used to advance the lagged vector fix to the
    /// current instant.
    gyro_history: std::collections::VecDeque<(Vec3, f64)>,
    /// Smoothed ground speed and the timestamp of the last delivery.
    speed: Option<(f64, f64)>,
    hard_failures: u32,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        Self {
            cfg,
            accel_lowpass: LowPassFilter::new(cfg.lowpass_cutoff_hz, cfg.sample_rate_hz),
            rate_lowpass: LowPassFilter::new(cfg.lowpass_cutoff_hz, cfg.sample_rate_hz),
            mag_lowpass: LowPassFilter::new(cfg.lowpass_cutoff_hz, cfg.sample_rate_hz),
            state: None,
            last_t: None,
            last_gyro: Vec3::ZERO,
            gyro_history: std::collections::VecDeque::new(),
            speed: None,
            hard_failures: 0,
        }
    }

    /// Current estimate; `None` before the first frame aligned the
    /// filter.
    pub fn state(&self) -> Option<&FilterState> {
        self.state.as_ref()
    }

    /// Number of covariance factorizations that failed even after
    /// repair. Two or more is a divergence signal.
    pub fn hard_failures(&self) -> u32 {
        self.hard_failures
    }

    /// Process one frame: reject non-monotonic timestamps, propagate
    /// over the elapsed interval, and correct when a fresh GPS sample
    /// and reliable vector pairs allow it.
    pub fn step(&mut self, frame: &SensorFrame) -> Result<StepAction, FrameError> {
        if let Some(previous) = self.last_t {
            if frame.t <= previous {
                return Err(FrameError::NonMonotonicTimestamp {
                    t: frame.t,
                    previous,
                });
            }
        }
        let previous_t = self.last_t.replace(frame.t);
        let filtered_accel = self.accel_lowpass.update(frame.accel);
        let filtered_rates = self.rate_lowpass.update(frame.gyro);
        let filtered_mag = self.mag_lowpass.update(frame.mag);

        let Some(state) = self.state else {
            self.state = Some(self.align(frame, filtered_accel, filtered_rates, filtered_mag));
            self.last_gyro = frame.gyro;
            return Ok(StepAction::Propagate);
        };

        // Time update over the elapsed interval with the rate sampled
        // at its start.
        let dt = frame.t - previous_t.expect("state implies a previous frame");
        let gyro = self.last_gyro;
        self.last_gyro = frame.gyro;
        self.gyro_history.push_back((gyro, dt));
        if self.gyro_history.len() > 512 {
            self.gyro_history.pop_front();
        }
        let propagated = match self.cfg.estimator {
            EstimatorKind::Ukf => {
                match ukf::propagate(&state, gyro, dt, &self.cfg.params, &self.cfg.noise) {
                    Ok(s) => s,
                    Err(_) => {
                        // Keep the flight alive on a factorization
                        // failure: advance the mean deterministically
                        // and let the covariance coast.
                        self.hard_failures += 1;
                        let mut fallback = state;
                        fallback.x = ukf::process_step(&state.x, gyro, dt);
                        fallback.p += self.cfg.noise.process;
                        fallback
                    }
                }
            }
            EstimatorKind::Ekf => ekf::predict(&state, gyro, dt, &self.cfg.noise),
        };
        self.state = Some(propagated);

        // Correction opportunity: a GPS sample delivered on this frame
        // and not stale.
        let Some(delivered) = frame.gps_speed else {
            return Ok(StepAction::Propagate);
        };
        if frame.gps_age >= self.cfg.gps_max_age_s {
            return Ok(StepAction::Propagate);
        }
        let speed = self.smooth_speed(frame.t, delivered);

        let rates = filtered_rates - propagated.bias();
        let accel_corrected = subtract_centrifugal(filtered_accel, rates, speed);
        let selection = select_pairs(
            filtered_accel,
            accel_corrected,
            filtered_mag,
            &self.cfg.mag_ref,
            self.cfg.gravity_mps2,
        );
        let (first, second, r_scale, correction_kind) = match selection {
            PairSelection::AccelPrimary { first, second } => {
                (first, second, 1.0, CorrectionKind::GravityFirst)
            }
            PairSelection::MagPrimary { first, second } => (
                first,
                second,
                self.cfg.mag_primary_r_scale,
                CorrectionKind::MagneticFirst,
            ),
            PairSelection::SkipMagUnreliable => {
                return Ok(StepAction::PropagateSkipCorrection(SkipReason::MagUnreliable));
            }
            PairSelection::SkipAcrobatic => {
                return Ok(StepAction::PropagateSkipCorrection(SkipReason::Acrobatic));
            }
        };
        let dcm = match triad_dcm(&first, &second) {
            Ok(dcm) => dcm,
            Err(TriadError::DegeneratePair) => {
                return Ok(StepAction::PropagateSkipCorrection(SkipReason::DegeneratePair));
            }
        };
        // The filtered signals describe the attitude one group delay
        // ago; advance the fix through the actual gyro history over
        // that window before comparing it with the filter state.
        let group_delay = 1.0 / (2.0 * std::f64::consts::PI * self.cfg.lowpass_cutoff_hz);
        let fix_now = self
            .advance_by_recent_rotation(dcm.to_quaternion(), group_delay, propagated.bias())
            .to_dcm();
        let observation = observe(&fix_now);

        let mut noise = self.cfg.noise;
        noise.observation *= r_scale;
        let corrected = match self.cfg.estimator {
            EstimatorKind::Ukf => {
                ukf::correct(&propagated, &observation, &self.cfg.params, &noise)
            }
            EstimatorKind::Ekf => ekf::correct(&propagated, &observation, &noise),
        };
        match corrected {
            Ok(s) => {
                self.state = Some(s);
                Ok(StepAction::PropagateAndCorrect(correction_kind))
            }
            Err(FilterError::SingularInnovationCovariance) => Ok(
                StepAction::PropagateSkipCorrection(SkipReason::SingularInnovation),
            ),
            Err(_) => {
                self.hard_failures += 1;
                Ok(StepAction::PropagateSkipCorrection(
                    SkipReason::NumericalFailure,
                ))
            }
        }
    }

    /// Advance an attitude by the rotation the vehicle actually
    /// performed over the trailing `window` seconds, composed from the
    /// buffered raw gyro samples corrected with the current bias
    /// estimate.
    fn advance_by_recent_rotation(
        &self,
        attitude: Quaternion,
        window: f64,
        bias: Vec3,
    ) -> Quaternion {
        // Walk back to the start of the window, then compose forward.
        let mut span = 0.0;
        let mut start = self.gyro_history.len();
        while start > 0 && span < window {
            start -= 1;
            span += self.gyro_history[start].1;
        }
        let mut q = attitude;
        for i in start..self.gyro_history.len() {
            let (omega, mut dt) = self.gyro_history[i];
            if i == start && span > window {
                // Only the tail of the oldest sample lies inside.
                dt -= span - window;
            }
            q = q.propagate(omega - bias, dt);
        }
        q
    }

    /// One-pole smoothing of the delivered ground speed over the
    /// (nominally one-second) delivery intervals.
    fn smooth_speed(&mut self, t: f64, delivered: f64) -> f64 {
        let tau = self.cfg.gps_smoothing_tau_s;
        let smoothed = match self.speed {
            Some((prev, prev_t)) if tau > 0.0 => {
                let interval = (t - prev_t).max(1e-6);
                prev + (delivered - prev) * (interval / (tau + interval))
            }
            _ => delivered,
        };
        self.speed = Some((smoothed, t));
        smoothed
    }

    /// Static alignment from the first frame: the attitude prior is the
    /// vector fix itself, biases start at zero with a wide prior.
    ///
    /// The reliability gating is deliberately not applied here — a log
    /// that opens mid-maneuver still needs *some* attitude — and a
    /// degenerate fix falls back to the identity attitude.
    fn align(
        &self,
        frame: &SensorFrame,
        filtered_accel: Vec3,
        filtered_rates: Vec3,
        filtered_mag: Vec3,
    ) -> FilterState {
        let speed = frame.gps_speed.unwrap_or(0.0);
        let accel_corrected = subtract_centrifugal(filtered_accel, filtered_rates, speed);
        let g_ref = Vec3::new(0.0, 0.0, 1.0);
        let attitude = TriadPair::new(-accel_corrected, g_ref)
            .and_then(|first| {
                let second = TriadPair::new(filtered_mag, self.cfg.mag_ref.field())?;
                triad_dcm(&first, &second)
            })
            .map(|dcm| dcm.to_quaternion())
            .unwrap_or(Quaternion::IDENTITY);
        FilterState::new(
            attitude,
            Vec3::ZERO,
            FilterState::initial_covariance(self.cfg.initial_quat_var, self.cfg.initial_bias_std_rps),
        )
    }
}
