//! Deterministic two-vector attitude observation.
//!
//! Builds a direction cosine matrix from two (observation, reference)
//! vector pairs, the classic two-vector triad construction: the first
//! pair is matched exactly and only the component of the second pair
//! orthogonal to the first survives. Which physical pair — gravity from
//! the accelerometer or the Earth's magnetic field from the
//! magnetometer — goes first is decided per frame by reliability
//! criteria on the measured magnitudes.
//!
//! The accelerometer path needs two fixups before it measures gravity:
//! the centripetal term `omega x (U, 0, 0)` is subtracted using the
//! GPS-provided forward speed `U`, and vibration is knocked down with a
//! first-order low-pass filter.

use crate::attitude::Dcm;
use crate::vec3::Vec3;
use std::fmt;

/// Cross products smaller than this mean the two directions of a pair
/// set are effectively parallel and the construction is degenerate.
pub const PARALLEL_EPS: f64 = 1e-6;

/// Errors from the observation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriadError {
    /// Observation or reference vectors of the two pairs are parallel
    /// (or a vector had no usable direction); the correction step for
    /// this frame should be skipped.
    DegeneratePair,
}

impl fmt::Display for TriadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriadError::DegeneratePair => write!(f, "observation/reference pair is degenerate"),
        }
    }
}

impl std::error::Error for TriadError {}

/// One (observation, reference) direction pair: the same physical unit
/// vector seen in the body frame and in NED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadPair {
    pub observed: Vec3,
    pub reference: Vec3,
}

impl TriadPair {
    /// Normalizes both vectors; fails if either is too small to carry a
    /// direction.
    pub fn new(observed: Vec3, reference: Vec3) -> Result<Self, TriadError> {
        let observed = observed.normalized().ok_or(TriadError::DegeneratePair)?;
        let reference = reference.normalized().ok_or(TriadError::DegeneratePair)?;
        Ok(Self {
            observed,
            reference,
        })
    }
}

/// NED components of the local Earth magnetic field, gauss.
///
/// A per-flight constant supplied by configuration; the flights this is
/// meant for span a few kilometres, over which the true field varies far
/// less than the magnetometer noise. Swap in a proper geomagnetic model
/// by computing this value per position before each run if needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticReference(Vec3);

impl MagneticReference {
    pub fn new(field_ned: Vec3) -> Result<Self, TriadError> {
        if !field_ned.is_finite() || field_ned.norm() < 1e-12 {
            return Err(TriadError::DegeneratePair);
        }
        Ok(Self(field_ned))
    }

    pub fn field(&self) -> Vec3 {
        self.0
    }
}

/// The four direction-cosine terms the filter observes: `c13` and `c23`
/// fix pitch and roll, `c11` and `c12` fix yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationVector {
    pub c13: f64,
    pub c23: f64,
    pub c11: f64,
    pub c12: f64,
}

/// Per-frame decision on how (or whether) to use the vector pairs.
/// Cases are evaluated in priority order; exactly one holds per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSelection {
    /// Near-1 g measured acceleration: stationary flight, the gravity
    /// pair is the more accurate one and goes first.
    AccelPrimary { first: TriadPair, second: TriadPair },
    /// Moderately off 1 g: coordinated turn, the magnetic pair is more
    /// trustworthy and goes first.
    MagPrimary { first: TriadPair, second: TriadPair },
    /// Magnetometer magnitude far from the reference field: skip the
    /// correction.
    SkipMagUnreliable,
    /// Acceleration far from 1 g: acrobatic flight, neither pair is
    /// reliable; skip the correction.
    SkipAcrobatic,
}

/// Direction cosine matrix from two vector pairs.
///
/// The result `A` is a proper rotation with `A * reference1 = observed1`
/// exact to roundoff; the second pair only contributes the component
/// orthogonal to the first.
pub fn triad_dcm(pair1: &TriadPair, pair2: &TriadPair) -> Result<Dcm, TriadError> {
    let w1 = pair1.observed;
    let w2 = pair2.observed;
    let v1 = pair1.reference;
    let v2 = pair2.reference;

    let wx = w1.cross(&w2);
    let vx = v1.cross(&v2);
    if wx.norm() <= PARALLEL_EPS || vx.norm() <= PARALLEL_EPS {
        return Err(TriadError::DegeneratePair);
    }

    let o2 = wx / wx.norm();
    let o3 = w1.cross(&o2);
    let r2 = vx / vx.norm();
    let r3 = v1.cross(&r2);

    let m_obs = Dcm::from_columns(w1, o2, o3);
    let m_ref = Dcm::from_columns(v1, r2, r3);
    Ok(m_obs.mul_mat(&m_ref.transpose()))
}

/// Remove the centripetal contribution from a measured specific force.
///
/// The body velocity of a fixed-wing aircraft in non-acrobatic flight is
/// dominated by its forward component, so it is approximated as
/// `(U, 0, 0)` with `U` the GPS ground speed, and the measurement is
/// corrected by subtracting `omega x (U, 0, 0)`.
pub fn subtract_centrifugal(accel_meas: Vec3, omega: Vec3, gps_speed: f64) -> Vec3 {
    accel_meas - omega.cross(&Vec3::new(gps_speed, 0.0, 0.0))
}

/// Pick the pair priority for one frame.
///
/// The flight condition is classified by the *measured* (low-pass
/// filtered, uncorrected) acceleration magnitude `accel_meas` — the
/// load factor, which reads 1/cos(bank) in a coordinated turn — while
/// the gravity observation itself uses the centrifugal-corrected vector
/// `accel_corrected`, which recovers the pure gravity direction. In
/// priority order:
///
/// 1. load within [0.9, 1.1] g: stationary flight, gravity pair first.
/// 2. load within (0.7, 0.9) or (1.1, 1.3) g: coordinated turn, the
///    magnetic pair is more trustworthy and goes first.
/// 3. `|mag|` outside [0.8, 1.2] of the reference magnitude: skip.
/// 4. otherwise (load outside (0.7, 1.3) g): skip as acrobatic.
///
/// The gravity observation is the *negated* corrected specific force:
/// an accelerometer at rest measures the reaction to gravity, which
/// points away from the Earth, while the NED reference is the downward
/// unit vector `(0, 0, 1)`.
pub fn select_pairs(
    accel_meas: Vec3,
    accel_corrected: Vec3,
    mag: Vec3,
    mag_ref: &MagneticReference,
    gravity_mps2: f64,
) -> PairSelection {
    let g_ref = Vec3::new(0.0, 0.0, 1.0);
    let load = accel_meas.norm() / gravity_mps2;
    let mag_ratio = mag.norm() / mag_ref.field().norm();

    let gravity_pair = TriadPair::new(-accel_corrected, g_ref);
    let magnetic_pair = TriadPair::new(mag, mag_ref.field());

    if (0.9..=1.1).contains(&load) {
        if let (Ok(first), Ok(second)) = (gravity_pair, magnetic_pair) {
            return PairSelection::AccelPrimary { first, second };
        }
    } else if (0.7 < load && load < 0.9) || (1.1 < load && load < 1.3) {
        if let (Ok(first), Ok(second)) = (magnetic_pair, gravity_pair) {
            return PairSelection::MagPrimary { first, second };
        }
    }
    if !(0.8..=1.2).contains(&mag_ratio) {
        return PairSelection::SkipMagUnreliable;
    }
    PairSelection::SkipAcrobatic
}

/// Read the four observed direction-cosine terms out of a matrix.
pub fn observe(dcm: &Dcm) -> ObservationVector {
    ObservationVector {
        c13: dcm.0[0][2],
        c23: dcm.0[1][2],
        c11: dcm.0[0][0],
        c12: dcm.0[0][1],
    }
}

/// First-order IIR low-pass with unit DC gain, applied componentwise.
///
/// Filter memory is explicit: the struct is the state, updates return
/// the filtered value. `alpha = dt / (tau + dt)` with `tau` the analog
/// time constant `1 / (2 pi cutoff)`.
#[derive(Debug, Clone, Copy)]
pub struct LowPassFilter {
    alpha: f64,
    state: Option<Vec3>,
}

impl LowPassFilter {
    /// `cutoff_hz` must lie in `(0, sample_rate_hz / 2)`.
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0,
            "cutoff must be positive and below Nyquist"
        );
        let dt = 1.0 / sample_rate_hz;
        let tau = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
        Self {
            alpha: dt / (tau + dt),
            state: None,
        }
    }

    /// Feed one sample; the first sample primes the state so the filter
    /// starts converged instead of rising from zero.
    pub fn update(&mut self, input: Vec3) -> Vec3 {
        let prev = self.state.unwrap_or(input);
        let out = prev + (input - prev) * self.alpha;
        self.state = Some(out);
        out
    }

    pub fn output(&self) -> Option<Vec3> {
        self.state
    }
}
