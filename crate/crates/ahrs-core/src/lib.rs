//! Attitude and gyro-bias estimation for small fixed-wing aircraft.
//!
//! The estimator fuses 100 Hz gyro/accelerometer/magnetometer data with
//! 1 Hz GPS speed. Gyros are integrated through quaternion kinematics
//! between corrections; at each GPS tick a two-vector triad construction
//! turns the accelerometer (gravity) and magnetometer (Earth field)
//! readings into four direction-cosine observations that correct the
//! attitude and reveal the gyro biases. Two estimator backends share the
//! identical process and observation models: an unscented Kalman filter
//! and an extended Kalman filter baseline for comparison studies.

pub mod attitude;
pub mod ekf;
pub mod linalg;
pub mod scheduler;
pub mod triad;
pub mod ukf;
pub mod vec3;

pub use attitude::{correct_rates, Dcm, EulerAngles, Quaternion};
pub use scheduler::{
    CorrectionKind, EstimatorKind, Pipeline, PipelineConfig, SensorFrame, SkipReason, StepAction,
};
pub use triad::{MagneticReference, ObservationVector, PairSelection, TriadPair};
pub use ukf::{FilterState, NoiseCovariances, UkfParams};
pub use vec3::Vec3;
