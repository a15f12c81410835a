//! Simulation and Monte Carlo harness for the attitude estimators:
//! scripted truth trajectories, sensor corruption, closed-loop replay
//! scoring, and per-channel bias/noise tolerance sweeps.

pub mod corrupt;
pub mod sweep;
pub mod trajectory;
pub mod trial;

pub use corrupt::{corrupt, CorruptionConfig, MagAnomaly, CANONICAL_SEED};
pub use sweep::{
    tolerance_sweep, PassCriterion, SweepOutcome, SweepSpec, SweptChannel, SweptKind,
};
pub use trajectory::{
    canonical_flight_script, coordinated_yaw_rate, generate_trajectory, Maneuver, TrajectoryError,
    TruthSample, WorldConfig,
};
pub use trial::{angle_diff, run_trial, AngleStats, ErrorReport, EvalConfig, SkipCounts};
