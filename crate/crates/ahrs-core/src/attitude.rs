//! Attitude representations and kinematics.
//!
//! Three interchangeable representations are provided: aerospace Euler
//! angles (roll/pitch/yaw, ZYX order), a unit quaternion, and the 3x3
//! direction cosine matrix that maps NED (north-east-down) vectors into
//! the body frame. The quaternion is the working representation; Euler
//! angles are for input/output and the DCM feeds the vector observation
//! model.
//!
//! Gyro integration uses the closed-form exponential of the quaternion
//! rate equation for a rate held constant over the step, which conserves
//! the quaternion norm analytically instead of relying on per-step
//! renormalization.

use crate::vec3::Vec3;

/// Aircraft Euler angles in radians, ZYX (yaw-pitch-roll) order.
///
/// Ranges: roll and yaw in `(-pi, pi]`, pitch in `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }
}

/// Unit quaternion representing the body attitude relative to NED.
///
/// Scalar-first convention `(w, x, y, z)`; Hamilton products with body
/// rates applied on the right. All public constructors and operations
/// keep the norm within 1e-9 of unity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Pitch values closer than this to +-90 degrees are flagged as
/// degenerate (gimbal lock) by [`Quaternion::to_euler_flagged`].
const GIMBAL_LOCK_MARGIN: f64 = 1e-9;

/// Below this total rotation angle (rad) the integration step switches
/// to its first-order series to avoid 0/0.
const SMALL_ANGLE: f64 = 1e-8;

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Quaternion from ZYX Euler angles via the half-angle product
    /// formulas.
    pub fn from_euler(e: EulerAngles) -> Self {
        let (sr, cr) = (e.roll / 2.0).sin_cos();
        let (sp, cp) = (e.pitch / 2.0).sin_cos();
        let (sy, cy) = (e.yaw / 2.0).sin_cos();
        Self {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
    }

    /// Euler angles, ignoring the gimbal-lock flag.
    pub fn to_euler(&self) -> EulerAngles {
        self.to_euler_flagged().0
    }

    /// Euler angles plus a flag set when the attitude is within the
    /// gimbal-lock margin of pitch +-90 degrees (roll/yaw become a
    /// single degree of freedom there).
    ///
    /// The five DCM entries involved are evaluated with exactly the same
    /// expressions as [`Quaternion::to_dcm`], so the extraction agrees
    /// bit-for-bit with going through the matrix.
    pub fn to_euler_flagged(&self) -> (EulerAngles, bool) {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let c13 = 2.0 * (x * z - w * y);
        let c23 = 2.0 * (y * z + w * x);
        let c33 = w * w - x * x - y * y + z * z;
        let c11 = w * w + x * x - y * y - z * z;
        let c12 = 2.0 * (x * y + w * z);

        let degenerate = c13.abs() > 1.0 - GIMBAL_LOCK_MARGIN;
        let pitch = -c13.clamp(-1.0, 1.0).asin();
        let roll = c23.atan2(c33);
        let yaw = c12.atan2(c11);
        (EulerAngles { roll, pitch, yaw }, degenerate)
    }

    /// Direction cosine matrix mapping NED vectors into the body frame.
    pub fn to_dcm(&self) -> Dcm {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let a1 = w * w + x * x - y * y - z * z;
        let a2 = w * w - x * x + y * y - z * z;
        let a3 = w * w - x * x - y * y + z * z;
        Dcm([
            [a1, 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)],
            [2.0 * (x * y - w * z), a2, 2.0 * (y * z + w * x)],
            [2.0 * (x * z + w * y), 2.0 * (y * z - w * x), a3],
        ])
    }

    /// Advance the attitude by `omega` (body rates, rad/s) held constant
    /// for `dt` seconds.
    ///
    /// Evaluates the exponential of the quaternion rate equation in
    /// closed form, which is norm-preserving; the result is renormalized
    /// only if accumulated roundoff exceeds 1e-12.
    pub fn propagate(&self, omega: Vec3, dt: f64) -> Quaternion {
        let q = rotation_step([self.w, self.x, self.y, self.z], omega, dt);
        let mut out = Quaternion::new(q[0], q[1], q[2], q[3]);
        if (out.norm() - 1.0).abs() > 1e-12 {
            out = out.normalized();
        }
        out
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quaternion {
        let n = self.norm();
        Quaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Angle (rad) of the relative rotation between two attitudes.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let dot = self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z;
        2.0 * dot.abs().clamp(-1.0, 1.0).acos()
    }
}

/// One integration step of the quaternion rate equation applied to a raw
/// 4-vector `[w, x, y, z]`.
///
/// The operator is orthogonal, so the input norm is conserved whether or
/// not it is 1; the filter relies on this when pushing sigma points with
/// off-sphere quaternion blocks through the process model.
pub(crate) fn rotation_step(q: [f64; 4], omega: Vec3, dt: f64) -> [f64; 4] {
    let (p, qr, r) = (omega.x, omega.y, omega.z);
    let [w, x, y, z] = q;
    // Product of the 4x4 skew rate matrix with q.
    let mw = -p * x - qr * y - r * z;
    let mx = p * w + r * y - qr * z;
    let my = qr * w - r * x + p * z;
    let mz = r * w + qr * x - p * y;

    let rate = omega.norm();
    let angle = rate * dt;
    if angle < SMALL_ANGLE {
        let h = 0.5 * dt;
        [w + h * mw, x + h * mx, y + h * my, z + h * mz]
    } else {
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin() / rate;
        [c * w + s * mw, c * x + s * mx, c * y + s * my, c * z + s * mz]
    }
}

/// Bias-corrected body rates: `measured - bias`.
pub fn correct_rates(measured: Vec3, bias: Vec3) -> Vec3 {
    measured - bias
}

/// Direction cosine matrix `{c_ij}` mapping NED vectors into the body
/// frame; row-major storage, `mat.0[i][j]` is `c_(i+1)(j+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(pub [[f64; 3]; 3]);

impl Dcm {
    pub const IDENTITY: Dcm = Dcm([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_columns(c1: Vec3, c2: Vec3, c3: Vec3) -> Self {
        Dcm([
            [c1.x, c2.x, c3.x],
            [c1.y, c2.y, c3.y],
            [c1.z, c2.z, c3.z],
        ])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::new(self.0[i][0], self.0[i][1], self.0[i][2])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Dcm {
        let m = &self.0;
        Dcm([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.row(0).dot(&v),
            self.row(1).dot(&v),
            self.row(2).dot(&v),
        )
    }

    pub fn mul_mat(&self, rhs: &Dcm) -> Dcm {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.row(i).dot(&rhs.column(j));
            }
        }
        Dcm(out)
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max-norm of `C*C^T - I`; zero for a perfectly orthonormal matrix.
    pub fn orthonormality_error(&self) -> f64 {
        let ct = self.transpose();
        let prod = self.mul_mat(&ct);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                err = err.max((prod.0[i][j] - expect).abs());
            }
        }
        err
    }

    /// Euler angles via the same arcsin/atan2 formulas used for the
    /// quaternion extraction.
    pub fn to_euler(&self) -> EulerAngles {
        let m = &self.0;
        EulerAngles {
            roll: m[1][2].atan2(m[2][2]),
            pitch: -m[0][2].clamp(-1.0, 1.0).asin(),
            yaw: m[0][1].atan2(m[0][0]),
        }
    }

    /// Unit quaternion for this rotation (Shepperd's method: pick the
    /// largest of the four candidate divisors for stability).
    pub fn to_quaternion(&self) -> Quaternion {
        let m = &self.0;
        let trace = m[0][0] + m[1][1] + m[2][2];
        // The matrix maps NED into body; the quaternion convention here
        // is its transpose action, hence the off-diagonal order below.
        let q = if trace > 0.0 {
            let s = 0.5 / (trace + 1.0).sqrt();
            Quaternion::new(
                0.25 / s,
                (m[1][2] - m[2][1]) * s,
                (m[2][0] - m[0][2]) * s,
                (m[0][1] - m[1][0]) * s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = 2.0 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
            Quaternion::new(
                (m[1][2] - m[2][1]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[2][0] + m[0][2]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = 2.0 * (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt();
            Quaternion::new(
                (m[2][0] - m[0][2]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt();
            Quaternion::new(
                (m[0][1] - m[1][0]) / s,
                (m[2][0] + m[0][2]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        let q = q.normalized();
        // Canonical sign: scalar part non-negative.
        if q.w < 0.0 {
            Quaternion::new(-q.w, -q.x, -q.y, -q.z)
        } else {
            q
        }
    }
}
