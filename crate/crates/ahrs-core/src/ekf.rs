//! Extended Kalman filter baseline.
//!
//! Shares the process model, observation model, noise covariances and
//! skip logic with the unscented filter — the two differ only in how
//! the nonlinearity reaches the covariance (Jacobian linearization here,
//! sigma points there), which is exactly what the tolerance comparison
//! between the two estimators is meant to isolate.

use crate::linalg::{symmetric_eigen_bounds, symmetrize};
use crate::triad::ObservationVector;
use crate::ukf::{
    process_step, FilterError, FilterState, NoiseCovariances, ObsCovariance, ObsVec,
    StateCovariance, StateVector, OBS_DIM, STATE_DIM,
};
use crate::vec3::Vec3;
use nalgebra::SMatrix;

/// Same small-angle switch as the integration step, so the Jacobian
/// differentiates the branch that actually runs.
const SMALL_ANGLE: f64 = 1e-8;

pub type ProcessJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ObservationJacobian = SMatrix<f64, OBS_DIM, STATE_DIM>;

const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// 4x4 skew rate matrix of the quaternion kinematics (without the 1/2).
fn rate_matrix(omega: Vec3) -> SMatrix<f64, 4, 4> {
    let (p, q, r) = (omega.x, omega.y, omega.z);
    SMatrix::<f64, 4, 4>::new(
        0.0, -p, -q, -r, //
        p, 0.0, r, -q, //
        q, -r, 0.0, p, //
        r, q, -p, 0.0,
    )
}

/// Closed-form quaternion transition matrix for a rate held constant
/// over `dt`: the exponential of half the rate matrix times `dt`.
fn transition_matrix(omega: Vec3, dt: f64) -> SMatrix<f64, 4, 4> {
    let m = rate_matrix(omega);
    let rate = omega.norm();
    let angle = rate * dt;
    if angle < SMALL_ANGLE {
        SMatrix::<f64, 4, 4>::identity() + m * (0.5 * dt)
    } else {
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin() / rate;
        SMatrix::<f64, 4, 4>::identity() * c + m * s
    }
}

/// Jacobian of the discrete process step with respect to the full state.
///
/// The quaternion block is linear in the quaternion for a fixed rate, so
/// the top-left block is the transition matrix itself; the bias enters
/// through the corrected rate, giving the top-right block; biases are
/// constant, so the bottom rows are `[0 | I]`.
pub fn process_jacobian(x: &StateVector, gyro_meas: Vec3, dt: f64) -> ProcessJacobian {
    let bias = Vec3::new(x[4], x[5], x[6]);
    let omega = gyro_meas - bias;
    let q = nalgebra::Vector4::new(x[0], x[1], x[2], x[3]);

    let mut jac = ProcessJacobian::identity();
    let phi = transition_matrix(omega, dt);
    jac.fixed_view_mut::<4, 4>(0, 0).copy_from(&phi);

    let rate = omega.norm();
    let m_q = rate_matrix(omega) * q;
    let axes = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];
    for (j, axis) in axes.iter().enumerate() {
        let dm_q = rate_matrix(*axis) * q;
        // d(phi q)/d omega_j, negated because omega = gyro - bias.
        let col = if rate * dt < SMALL_ANGLE {
            dm_q * (0.5 * dt)
        } else {
            let h = rate * dt / 2.0;
            let (sin_h, cos_h) = h.sin_cos();
            let w_j = match j {
                0 => omega.x,
                1 => omega.y,
                _ => omega.z,
            };
            q * (-sin_h * dt * w_j / (2.0 * rate))
                + m_q * (cos_h * dt * w_j / (2.0 * rate * rate) - sin_h * w_j / rate.powi(3))
                + dm_q * (sin_h / rate)
        };
        jac.fixed_view_mut::<4, 1>(0, 4 + j).copy_from(&(-col));
    }
    jac
}

/// Jacobian of the four observed direction-cosine terms with respect to
/// the state; the bias columns are identically zero.
pub fn observation_jacobian(x: &StateVector) -> ObservationJacobian {
    let (w, qx, qy, qz) = (x[0], x[1], x[2], x[3]);
    let mut jac = ObservationJacobian::zeros();
    // c13 = 2 (qx qz - w qy)
    jac[(0, 0)] = -2.0 * qy;
    jac[(0, 1)] = 2.0 * qz;
    jac[(0, 2)] = -2.0 * w;
    jac[(0, 3)] = 2.0 * qx;
    // c23 = 2 (qy qz + w qx)
    jac[(1, 0)] = 2.0 * qx;
    jac[(1, 1)] = 2.0 * w;
    jac[(1, 2)] = 2.0 * qz;
    jac[(1, 3)] = 2.0 * qy;
    // c11 = w^2 + qx^2 - qy^2 - qz^2
    jac[(2, 0)] = 2.0 * w;
    jac[(2, 1)] = 2.0 * qx;
    jac[(2, 2)] = -2.0 * qy;
    jac[(2, 3)] = -2.0 * qz;
    // c12 = 2 (qx qy + w qz)
    jac[(3, 0)] = 2.0 * qz;
    jac[(3, 1)] = 2.0 * qy;
    jac[(3, 2)] = 2.0 * qx;
    jac[(3, 3)] = 2.0 * w;
    jac
}

/// Textbook EKF time update through an arbitrary process map and its
/// Jacobian. No quaternion handling; see [`predict`].
pub fn predict_with<F>(
    state: &FilterState,
    process: F,
    jacobian: &ProcessJacobian,
    process_noise: &StateCovariance,
) -> FilterState
where
    F: Fn(&StateVector) -> StateVector,
{
    let x = process(&state.x);
    let mut p = jacobian * state.p * jacobian.transpose() + process_noise;
    symmetrize(&mut p);
    FilterState { x, p }
}

/// Textbook EKF measurement update through an arbitrary observation map
/// and its Jacobian. No quaternion handling; see [`correct`].
pub fn correct_with<H>(
    state: &FilterState,
    observe: H,
    jacobian: &ObservationJacobian,
    measurement: &ObsVec,
    observation_noise: &ObsCovariance,
) -> Result<FilterState, FilterError>
where
    H: Fn(&StateVector) -> ObsVec,
{
    let mut innovation_cov = jacobian * state.p * jacobian.transpose() + observation_noise;
    symmetrize(&mut innovation_cov);
    let (min_eig, max_eig) = symmetric_eigen_bounds(&innovation_cov);
    if min_eig <= 0.0 || max_eig / min_eig > MAX_INNOVATION_CONDITION {
        return Err(FilterError::SingularInnovationCovariance);
    }
    let s_inv = nalgebra::Cholesky::new(innovation_cov)
        .ok_or(FilterError::SingularInnovationCovariance)?
        .inverse();

    let gain = state.p * jacobian.transpose() * s_inv;
    let x = state.x + gain * (measurement - observe(&state.x));
    let mut p = state.p - gain * innovation_cov * gain.transpose();
    symmetrize(&mut p);
    Ok(FilterState { x, p })
}

/// Time update of the attitude EKF; the quaternion block of the mean is
/// renormalized as in the unscented filter.
pub fn predict(
    state: &FilterState,
    gyro_meas: Vec3,
    dt: f64,
    noise: &NoiseCovariances,
) -> FilterState {
    let jac = process_jacobian(&state.x, gyro_meas, dt);
    let mut out = predict_with(
        state,
        |x| process_step(x, gyro_meas, dt),
        &jac,
        &noise.process,
    );
    renormalize_quaternion(&mut out);
    out
}

/// Measurement update of the attitude EKF against the four observed
/// direction-cosine terms.
pub fn correct(
    state: &FilterState,
    observation: &ObservationVector,
    noise: &NoiseCovariances,
) -> Result<FilterState, FilterError> {
    let y = ObsVec::from_column_slice(&[
        observation.c13,
        observation.c23,
        observation.c11,
        observation.c12,
    ]);
    let jac = observation_jacobian(&state.x);
    let mut out = correct_with(
        state,
        crate::ukf::observed_terms_raw,
        &jac,
        &y,
        &noise.observation,
    )?;
    renormalize_quaternion(&mut out);
    Ok(out)
}

fn renormalize_quaternion(state: &mut FilterState) {
    let n = (state.x[0] * state.x[0]
        + state.x[1] * state.x[1]
        + state.x[2] * state.x[2]
        + state.x[3] * state.x[3])
        .sqrt();
    if n > 1e-30 {
        for i in 0..4 {
            state.x[i] /= n;
        }
    }
}
