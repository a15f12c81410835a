//! Kinematic truth-trajectory synthesis.
//!
//! A flight is scripted as a list of maneuvers, each defining a body
//! angular-rate profile and the forward speed. The truth attitude is
//! produced by exact quaternion integration of those rates at the
//! sample interval — the same discrete operator the estimators use — so
//! a noise-free replay can track the truth to numerical precision. Body
//! accelerometer and magnetometer readings are synthesized from the
//! integrated attitude, the configured NED field, gravity, and the
//! centripetal term of the forward velocity.

use ahrs_core::{Quaternion, Vec3};
use std::f64::consts::PI;
use std::fmt;

/// Sample interval and physical references shared by a whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    /// Sample interval, seconds (100 Hz default).
    pub dt: f64,
    /// Earth magnetic field in NED, gauss.
    pub mag_ref: Vec3,
    /// Gravity magnitude, m/s^2.
    pub gravity: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            mag_ref: Vec3::new(0.25, 0.0, 0.40),
            gravity: 9.81,
        }
    }
}

/// Scripted flight phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maneuver {
    /// Wings-level cruise at the given ground speed.
    SteadyFlight { duration_s: f64, speed_mps: f64 },
    /// Banked turn: rolls in, holds the bank and yaw rate, rolls out.
    /// Pass `coordinated_yaw_rate` for a turn without sideforce.
    CoordinatedTurn {
        duration_s: f64,
        yaw_rate_rps: f64,
        bank_rad: f64,
    },
    /// One full sine period of pitch oscillation.
    PitchDoublet { duration_s: f64, amplitude_rad: f64 },
    /// Band-limited angular-rate perturbation on all three axes with
    /// the given total RMS per axis (deterministic multi-sine).
    Gust { duration_s: f64, rms_rps: f64 },
}

impl Maneuver {
    fn duration(&self) -> f64 {
        match self {
            Maneuver::SteadyFlight { duration_s, .. }
            | Maneuver::CoordinatedTurn { duration_s, .. }
            | Maneuver::PitchDoublet { duration_s, .. }
            | Maneuver::Gust { duration_s, .. } => *duration_s,
        }
    }
}

/// Yaw rate that makes a turn at `bank_rad` coordinated (no lateral
/// specific force) at the given speed: `g * tan(bank) / speed`.
pub fn coordinated_yaw_rate(bank_rad: f64, speed_mps: f64, gravity: f64) -> f64 {
    gravity * bank_rad.tan() / speed_mps
}

/// One tick of ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub attitude: Quaternion,
    /// True body rates, rad/s.
    pub omega: Vec3,
    /// True specific force (what an ideal accelerometer reads), m/s^2.
    pub accel_body: Vec3,
    /// True body-frame magnetic field, gauss.
    pub mag_body: Vec3,
    /// Ground speed, m/s.
    pub speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryError {
    EmptyScript,
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryError::EmptyScript => write!(f, "maneuver script is empty"),
        }
    }
}

impl std::error::Error for TrajectoryError {}

/// Smooth 0 -> 1 -> 0 envelope with raised-cosine ramps of length
/// `ramp` at both ends; returns (value, derivative).
fn ramp_envelope(tau: f64, duration: f64, ramp: f64) -> (f64, f64) {
    if tau < ramp {
        let phase = PI * tau / ramp;
        (0.5 * (1.0 - phase.cos()), 0.5 * PI / ramp * phase.sin())
    } else if tau > duration - ramp {
        let back = duration - tau;
        let phase = PI * back / ramp;
        (0.5 * (1.0 - phase.cos()), -0.5 * PI / ramp * phase.sin())
    } else {
        (1.0, 0.0)
    }
}

/// Body rates and speed commanded by a maneuver at local time `tau`.
fn maneuver_rates(m: &Maneuver, tau: f64, speed: f64) -> Vec3 {
    match *m {
        Maneuver::SteadyFlight { .. } => Vec3::ZERO,
        Maneuver::CoordinatedTurn {
            duration_s,
            yaw_rate_rps,
            bank_rad,
        } => {
            let ramp = (duration_s / 4.0).min(2.0);
            let (env, env_dot) = ramp_envelope(tau, duration_s, ramp);
            let roll = bank_rad * env;
            let roll_rate = bank_rad * env_dot;
            // Yaw rate scales with the bank envelope so the turn stays
            // (approximately) coordinated through the transitions.
            let yaw_rate = yaw_rate_rps * env;
            // Euler-rate to body-rate at pitch 0:
            //   P = roll_rate, Q = yaw_rate sin(roll), R = yaw_rate cos(roll)
            Vec3::new(roll_rate, yaw_rate * roll.sin(), yaw_rate * roll.cos())
        }
        Maneuver::PitchDoublet {
            duration_s,
            amplitude_rad,
        } => {
            let pitch_rate = amplitude_rad * 2.0 * PI / duration_s * (2.0 * PI * tau / duration_s).cos();
            Vec3::new(0.0, pitch_rate, 0.0)
        }
        Maneuver::Gust { rms_rps, .. } => {
            // Five incommensurate tones per axis with fixed phases;
            // amplitude rms*sqrt(2/5) per tone gives the requested RMS.
            // Frequencies sit in the band atmospheric turbulence
            // excites on a small airframe.
            const TONES_HZ: [f64; 5] = [0.3, 0.7, 1.2, 1.9, 2.9];
            let amp = rms_rps * (2.0 / TONES_HZ.len() as f64).sqrt();
            let mut v = [0.0; 3];
            for (axis, value) in v.iter_mut().enumerate() {
                for (n, f) in TONES_HZ.iter().enumerate() {
                    let phase = (axis as f64) * 1.7 + (n as f64) * 2.39996;
                    *value += amp * (2.0 * PI * f * tau + phase).sin();
                }
            }
            let _ = speed;
            Vec3::new(v[0], v[1], v[2])
        }
    }
}

/// Synthesize the truth stream for a script.
pub fn generate_trajectory(
    script: &[Maneuver],
    world: &WorldConfig,
) -> Result<Vec<TruthSample>, TrajectoryError> {
    if script.is_empty() {
        return Err(TrajectoryError::EmptyScript);
    }
    let mut samples = Vec::new();
    let mut attitude = Quaternion::IDENTITY;
    let mut speed = 20.0;
    let mut tick: u64 = 0;

    for maneuver in script {
        if let Maneuver::SteadyFlight { speed_mps, .. } = maneuver {
            speed = *speed_mps;
        }
        let steps = (maneuver.duration() / world.dt).round() as u64;
        for local in 0..steps {
            let t = tick as f64 * world.dt;
            let tau = local as f64 * world.dt;
            let omega = maneuver_rates(maneuver, tau, speed);

            let dcm = attitude.to_dcm();
            let accel_body = omega.cross(&Vec3::new(speed, 0.0, 0.0))
                + dcm.mul_vec(Vec3::new(0.0, 0.0, -world.gravity));
            let mag_body = dcm.mul_vec(world.mag_ref);

            samples.push(TruthSample {
                t,
                attitude,
                omega,
                accel_body,
                mag_body,
                speed_mps: speed,
            });

            attitude = attitude.propagate(omega, world.dt);
            tick += 1;
        }
    }
    Ok(samples)
}

/// The canonical four-phase evaluation flight, 600 s total: a left
/// coordinated turn, a long cruise with a gust segment, a right
/// coordinated turn, and a final cruise containing a pitch doublet, a
/// firmer banked turn whose ~1.15 g load factor promotes the magnetic
/// pair, and a brief steep turn whose load factor disqualifies both
/// vector pairs.
pub fn canonical_flight_script() -> Vec<Maneuver> {
    let g = 9.81;
    let speed = 20.0;
    let bank = 12.0_f64.to_radians();
    let firm = 30.0_f64.to_radians();
    let steep = 48.0_f64.to_radians();
    vec![
        Maneuver::SteadyFlight {
            duration_s: 70.0,
            speed_mps: speed,
        },
        Maneuver::CoordinatedTurn {
            duration_s: 20.0,
            yaw_rate_rps: coordinated_yaw_rate(-bank, speed, g),
            bank_rad: -bank,
        },
        Maneuver::SteadyFlight {
            duration_s: 100.0,
            speed_mps: speed,
        },
        Maneuver::CoordinatedTurn {
            duration_s: 12.0,
            yaw_rate_rps: coordinated_yaw_rate(firm, speed, g),
            bank_rad: firm,
        },
        Maneuver::SteadyFlight {
            duration_s: 68.0,
            speed_mps: speed,
        },
        Maneuver::Gust {
            duration_s: 30.0,
            rms_rps: 1.5_f64.to_radians(),
        },
        Maneuver::SteadyFlight {
            duration_s: 30.0,
            speed_mps: speed,
        },
        Maneuver::CoordinatedTurn {
            duration_s: 20.0,
            yaw_rate_rps: coordinated_yaw_rate(bank, speed, g),
            bank_rad: bank,
        },
        Maneuver::SteadyFlight {
            duration_s: 60.0,
            speed_mps: speed,
        },
        Maneuver::PitchDoublet {
            duration_s: 12.0,
            amplitude_rad: 4.0_f64.to_radians(),
        },
        Maneuver::SteadyFlight {
            duration_s: 90.0,
            speed_mps: speed,
        },
        Maneuver::CoordinatedTurn {
            duration_s: 8.0,
            yaw_rate_rps: coordinated_yaw_rate(steep, speed, g),
            bank_rad: steep,
        },
        Maneuver::SteadyFlight {
            duration_s: 80.0,
            speed_mps: speed,
        },
    ]
}

/// Start of the steep-turn segment in the canonical script, seconds.
pub fn canonical_steep_turn_start() -> f64 {
    70.0 + 20.0 + 100.0 + 12.0 + 68.0 + 30.0 + 30.0 + 20.0 + 60.0 + 12.0 + 90.0
}
