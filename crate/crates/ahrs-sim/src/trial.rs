//! Closed-loop replay of a corrupted stream and its error accounting.

use crate::corrupt::{corrupt, CorruptionConfig};
use crate::trajectory::TruthSample;
use ahrs_core::{EulerAngles, Pipeline, PipelineConfig, SkipReason, StepAction};
use std::f64::consts::PI;

/// Error-evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Alignment window excluded from the pass/fail statistics: the
    /// filter starts with zero bias knowledge, and the transient while
    /// the biases are being learned is not representative of the
    /// operational accuracy the error budgets refer to. Full-run maxima
    /// are still reported separately.
    pub settle_s: f64,
    /// Any attitude error beyond this flags the run as diverged.
    pub divergence_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            settle_s: 90.0,
            divergence_deg: 45.0,
        }
    }
}

/// Max and RMS of one error channel, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngleStats {
    pub max_deg: f64,
    pub rms_deg: f64,
}

/// Correction-skip tally by reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SkipCounts {
    pub mag_unreliable: u32,
    pub acrobatic: u32,
    pub degenerate_pair: u32,
    pub singular_innovation: u32,
    pub numerical_failure: u32,
}

impl SkipCounts {
    fn record(&mut self, reason: SkipReason) {
        match reason {
            SkipReason::MagUnreliable => self.mag_unreliable += 1,
            SkipReason::Acrobatic => self.acrobatic += 1,
            SkipReason::DegeneratePair => self.degenerate_pair += 1,
            SkipReason::SingularInnovation => self.singular_innovation += 1,
            SkipReason::NumericalFailure => self.numerical_failure += 1,
        }
    }
}

/// Outcome of one replay.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    /// Post-settle statistics per Euler angle.
    pub roll: AngleStats,
    pub pitch: AngleStats,
    pub yaw: AngleStats,
    /// Whole-run maxima including the alignment transient.
    pub full_run_max_roll_deg: f64,
    pub full_run_max_pitch_deg: f64,
    pub full_run_max_yaw_deg: f64,
    pub corrections: u32,
    /// Corrections led by the gravity pair (stationary-flight case).
    pub corrections_gravity_first: u32,
    /// Corrections led by the magnetic pair (coordinated-turn case).
    pub corrections_magnetic_first: u32,
    pub skips: SkipCounts,
    pub rejected_frames: u32,
    pub diverged: bool,
}

impl ErrorReport {
    /// Pass/fail against per-angle maximum-error bounds (degrees),
    /// evaluated on the post-settle statistics. A diverged run fails
    /// any finite bound through its error maxima; the flag itself is
    /// reported separately.
    pub fn passes(&self, max_roll_deg: f64, max_pitch_deg: f64, max_yaw_deg: f64) -> bool {
        self.roll.max_deg <= max_roll_deg
            && self.pitch.max_deg <= max_pitch_deg
            && self.yaw.max_deg <= max_yaw_deg
    }
}

/// Shortest signed angular distance `a - b`, radians in (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b + PI).rem_euclid(2.0 * PI) - PI;
    if d == -PI {
        PI
    } else {
        d
    }
}

/// Corrupt a truth stream, replay it through the configured estimator,
/// and score the attitude errors against the truth.
pub fn run_trial(
    truth: &[TruthSample],
    corruption: &CorruptionConfig,
    pipeline_cfg: &PipelineConfig,
    eval: &EvalConfig,
) -> ErrorReport {
    let frames = corrupt(truth, corruption);
    let mut pipeline = Pipeline::new(*pipeline_cfg);
    let mut report = ErrorReport::default();

    let mut n_settled = 0u64;
    let mut sum_sq = [0.0f64; 3];
    let divergence_rad = eval.divergence_deg.to_radians();

    for (frame, sample) in frames.iter().zip(truth.iter()) {
        match pipeline.step(frame) {
            Ok(StepAction::Propagate) => {}
            Ok(StepAction::PropagateAndCorrect(kind)) => {
                report.corrections += 1;
                match kind {
                    ahrs_core::CorrectionKind::GravityFirst => {
                        report.corrections_gravity_first += 1
                    }
                    ahrs_core::CorrectionKind::MagneticFirst => {
                        report.corrections_magnetic_first += 1
                    }
                }
            }
            Ok(StepAction::PropagateSkipCorrection(reason)) => report.skips.record(reason),
            Err(_) => {
                report.rejected_frames += 1;
                continue;
            }
        }
        let Some(state) = pipeline.state() else {
            continue;
        };
        let est = state.attitude().to_euler();
        let tru = sample.attitude.to_euler();
        let err = [
            angle_diff(est.roll, tru.roll),
            angle_diff(est.pitch, tru.pitch),
            angle_diff(est.yaw, tru.yaw),
        ];

        if err.iter().any(|e| e.abs() > divergence_rad) {
            report.diverged = true;
        }
        let deg = [
            err[0].abs().to_degrees(),
            err[1].abs().to_degrees(),
            err[2].abs().to_degrees(),
        ];
        report.full_run_max_roll_deg = report.full_run_max_roll_deg.max(deg[0]);
        report.full_run_max_pitch_deg = report.full_run_max_pitch_deg.max(deg[1]);
        report.full_run_max_yaw_deg = report.full_run_max_yaw_deg.max(deg[2]);

        if sample.t >= eval.settle_s {
            report.roll.max_deg = report.roll.max_deg.max(deg[0]);
            report.pitch.max_deg = report.pitch.max_deg.max(deg[1]);
            report.yaw.max_deg = report.yaw.max_deg.max(deg[2]);
            for (acc, d) in sum_sq.iter_mut().zip(deg.iter()) {
                *acc += d * d;
            }
            n_settled += 1;
        }
    }

    if n_settled > 0 {
        report.roll.rms_deg = (sum_sq[0] / n_settled as f64).sqrt();
        report.pitch.rms_deg = (sum_sq[1] / n_settled as f64).sqrt();
        report.yaw.rms_deg = (sum_sq[2] / n_settled as f64).sqrt();
    }
    if pipeline.hard_failures() >= 2 {
        report.diverged = true;
    }
    report
}

/// Truth Euler angles of a sample, convenience for log emission.
pub fn truth_euler(sample: &TruthSample) -> EulerAngles {
    sample.attitude.to_euler()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrupt::CorruptionConfig;
    use crate::trajectory::{canonical_flight_script, generate_trajectory, WorldConfig};
    use ahrs_core::{EstimatorKind, MagneticReference, Vec3};

    fn pipeline_cfg(kind: EstimatorKind) -> PipelineConfig {
        let world = WorldConfig::default();
        PipelineConfig::new(kind, MagneticReference::new(world.mag_ref).unwrap())
    }

    #[test]
    fn angle_diff_handles_the_seam() {
        let a = 179.0_f64.to_radians();
        let b = -179.0_f64.to_radians();
        assert!((angle_diff(a, b).to_degrees() + 2.0).abs() < 1e-9);
        assert!((angle_diff(b, a).to_degrees() - 2.0).abs() < 1e-9);
        assert_eq!(angle_diff(1.0, 1.0), 0.0);
    }

    #[test]
    fn zero_noise_replay_tracks_truth_tightly() {
        let truth = generate_trajectory(&canonical_flight_script(), &WorldConfig::default())
            .unwrap();
        let report = run_trial(
            &truth,
            &CorruptionConfig::pristine(1),
            &pipeline_cfg(EstimatorKind::Ukf),
            &EvalConfig::default(),
        );
        assert!(!report.diverged);
        // Steady and gentle-turn phases track to hundredths of a
        // degree; the worst residual (measured 0.14 deg) is a filtering
        // transient on the steep-turn ramps, where the roll rate
        // reaches 37 deg/s.
        assert!(
            report.full_run_max_roll_deg < 0.25
                && report.full_run_max_pitch_deg < 0.25
                && report.full_run_max_yaw_deg < 0.25,
            "zero-noise errors: roll {} pitch {} yaw {}",
            report.full_run_max_roll_deg,
            report.full_run_max_pitch_deg,
            report.full_run_max_yaw_deg
        );
        assert!(report.corrections > 500);
        // The steep turn skips corrections even without noise.
        assert!(report.skips.acrobatic > 0);
    }

    #[test]
    fn replay_is_deterministic() {
        let truth = generate_trajectory(&canonical_flight_script(), &WorldConfig::default())
            .unwrap();
        let cfg = CorruptionConfig::typical_mems(17);
        let a = run_trial(
            &truth,
            &cfg,
            &pipeline_cfg(EstimatorKind::Ukf),
            &EvalConfig::default(),
        );
        let b = run_trial(
            &truth,
            &cfg,
            &pipeline_cfg(EstimatorKind::Ukf),
            &EvalConfig::default(),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn gyro_bias_alone_is_absorbed() {
        // Bias-only corruption (no noise): the filter must learn the
        // bias and keep tight attitude errors after settling.
        let truth = generate_trajectory(&canonical_flight_script(), &WorldConfig::default())
            .unwrap();
        let mut corruption = CorruptionConfig::pristine(3);
        let d = 3.0_f64.to_radians();
        corruption.gyro_bias_rps = Vec3::new(d, -d, d);
        corruption.gps_delay_s = 1.0;
        let report = run_trial(
            &truth,
            &corruption,
            &pipeline_cfg(EstimatorKind::Ukf),
            &EvalConfig::default(),
        );
        assert!(!report.diverged);
        assert!(
            report.roll.max_deg < 1.0 && report.pitch.max_deg < 1.0 && report.yaw.max_deg < 4.0,
            "bias-only errors: {report:?}"
        );
    }
}
