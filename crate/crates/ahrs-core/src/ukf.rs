//! Additive-noise unscented Kalman filter over the 7-state
//! [quaternion, gyro-bias] vector.
//!
//! The state is treated as a plain vector for the unscented transform;
//! the quaternion block of the mean is renormalized after every weighted
//! mean and after every correction. Sigma points themselves are not
//! renormalized during propagation (the integration operator is
//! orthogonal, so each point keeps whatever norm it was drawn with), but
//! their quaternion blocks are renormalized before evaluating the
//! observation model, which is only meaningful on the unit sphere.
//!
//! `propagate_with` / `correct_with` expose the transform over arbitrary
//! process and observation maps; the attitude-specific entry points
//! [`propagate`] and [`correct`] wrap them with the quaternion process
//! model and the direction-cosine observation model.

use crate::attitude::{rotation_step, Quaternion};
use crate::linalg::{psd_cholesky, symmetric_eigen_bounds, symmetrize};
use crate::triad::ObservationVector;
use crate::vec3::Vec3;
use nalgebra::{SMatrix, SVector};
use std::fmt;

/// State dimension: four quaternion components plus three gyro biases.
pub const STATE_DIM: usize = 7;
/// Observation dimension: the four direction-cosine terms.
pub const OBS_DIM: usize = 4;
/// Number of sigma points, `2 * STATE_DIM + 1`.
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ObsVec = SVector<f64, OBS_DIM>;
pub type ObsCovariance = SMatrix<f64, OBS_DIM, OBS_DIM>;

/// Maximum innovation-covariance condition number before a correction
/// is refused as numerically singular.
const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterError {
    /// Sigma-point scaling is invalid (`alpha` out of range or
    /// `L + lambda <= 0`).
    InvalidParams,
    /// The covariance could not be factored even after jitter repair.
    CholeskyFailure,
    /// The innovation covariance is singular or too ill-conditioned to
    /// invert; the caller should keep the a-priori state.
    SingularInnovationCovariance,
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::InvalidParams => write!(f, "invalid sigma-point scaling parameters"),
            FilterError::CholeskyFailure => {
                write!(f, "covariance factorization failed after repair")
            }
            FilterError::SingularInnovationCovariance => {
                write!(f, "innovation covariance is singular")
            }
        }
    }
}

impl std::error::Error for FilterError {}

/// Sigma-point scaling parameters of the scaled unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    /// Spread of the sigma points around the mean, in (0, 1].
    pub alpha: f64,
    /// Prior-distribution constant; 2 is optimal for Gaussians.
    pub beta: f64,
    /// Secondary scaling constant.
    pub kappa: f64,
}

impl Default for UkfParams {
    /// `alpha = 1` spreads the sigma points over the full covariance;
    /// with a tiny `alpha` the transform degenerates to a numerical
    /// Jacobian and gives up its robustness advantage during
    /// large-error transients. `beta = 2` is the Gaussian optimum.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    /// Composite scaling `lambda = alpha^2 (L + kappa) - L`.
    pub fn lambda(&self) -> f64 {
        let l = STATE_DIM as f64;
        self.alpha * self.alpha * (l + self.kappa) - l
    }

    /// Sigma-point scale `gamma = sqrt(L + lambda)`.
    pub fn gamma(&self) -> f64 {
        (STATE_DIM as f64 + self.lambda()).sqrt()
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let ok = self.alpha > 0.0
            && self.alpha <= 1.0
            && self.alpha.is_finite()
            && self.beta.is_finite()
            && self.kappa.is_finite()
            && STATE_DIM as f64 + self.lambda() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FilterError::InvalidParams)
        }
    }

    /// Mean and covariance weights of the transform.
    pub fn weights(&self) -> Result<Weights, FilterError> {
        self.validate()?;
        let l = STATE_DIM as f64;
        let lambda = self.lambda();
        let denom = l + lambda;
        Ok(Weights {
            mean0: lambda / denom,
            cov0: lambda / denom + (1.0 - self.alpha * self.alpha + self.beta),
            rest: 1.0 / (2.0 * denom),
        })
    }
}

/// Unscented-transform weights: `mean0`/`cov0` apply to the central
/// point, `rest` to each of the `2L` symmetric points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub mean0: f64,
    pub cov0: f64,
    pub rest: f64,
}

/// Process and observation noise covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCovariances {
    pub process: StateCovariance,
    pub observation: ObsCovariance,
}

impl NoiseCovariances {
    /// Diagonal covariances: `q_quat` on the four quaternion states,
    /// `q_bias` on the three bias states, `r_obs` on the four observed
    /// direction-cosine terms.
    pub fn diagonal(q_quat: f64, q_bias: f64, r_obs: f64) -> Self {
        Self::split(q_quat, q_bias, r_obs, r_obs)
    }

    /// Like [`NoiseCovariances::diagonal`] but with separate variances
    /// for the two tilt terms (`c13`, `c23`) and the two heading terms
    /// (`c11`, `c12`), whose error budgets differ: heading terms carry
    /// the magnetometer bias amplified by the field inclination.
    pub fn split(q_quat: f64, q_bias: f64, r_tilt: f64, r_heading: f64) -> Self {
        let mut process = StateCovariance::zeros();
        for i in 0..4 {
            process[(i, i)] = q_quat;
        }
        for i in 4..STATE_DIM {
            process[(i, i)] = q_bias;
        }
        let mut observation = ObsCovariance::zeros();
        observation[(0, 0)] = r_tilt;
        observation[(1, 1)] = r_tilt;
        observation[(2, 2)] = r_heading;
        observation[(3, 3)] = r_heading;
        Self {
            process,
            observation,
        }
    }
}

impl Default for NoiseCovariances {
    /// Process noise 1e-6 on the quaternion states (the discrete model
    /// holds rates constant over the step, so it must not be exactly
    /// zero) and zero on the bias states, which are modeled constant.
    ///
    /// The observation variances are deliberately wider than the
    /// level-flight measurement noise (a Monte Carlo of the triad
    /// output under typical MEMS-grade sensor errors measures about
    /// 1e-4 per term): in maneuvering flight the magnetometer bias,
    /// the delayed ground speed and imperfect centripetal removal
    /// dominate, and heading terms see the tilt error amplified by the
    /// field inclination on top.
    fn default() -> Self {
        Self::split(1e-6, 0.0, 6e-3, 1.5e-2)
    }
}

/// Filter estimate: 7-vector mean and 7x7 covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x: StateVector,
    pub p: StateCovariance,
}

impl FilterState {
    pub fn new(attitude: Quaternion, bias: Vec3, p: StateCovariance) -> Self {
        let x = StateVector::from_column_slice(&[
            attitude.w, attitude.x, attitude.y, attitude.z, bias.x, bias.y, bias.z,
        ]);
        Self { x, p }
    }

    /// Diagonal prior covariance: `quat_var` on each quaternion state,
    /// `bias_std` (rad/s) squared on each bias state.
    pub fn initial_covariance(quat_var: f64, bias_std: f64) -> StateCovariance {
        let mut p = StateCovariance::zeros();
        for i in 0..4 {
            p[(i, i)] = quat_var;
        }
        for i in 4..STATE_DIM {
            p[(i, i)] = bias_std * bias_std;
        }
        p
    }

    pub fn attitude(&self) -> Quaternion {
        Quaternion::new(self.x[0], self.x[1], self.x[2], self.x[3])
    }

    pub fn bias(&self) -> Vec3 {
        Vec3::new(self.x[4], self.x[5], self.x[6])
    }

    fn renormalize_quaternion(&mut self) {
        let n = (self.x[0] * self.x[0]
            + self.x[1] * self.x[1]
            + self.x[2] * self.x[2]
            + self.x[3] * self.x[3])
            .sqrt();
        if n > 1e-30 {
            for i in 0..4 {
                self.x[i] /= n;
            }
        }
    }
}

/// The `2L + 1` sigma points of a state distribution.
#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub points: [StateVector; SIGMA_COUNT],
}

/// Draw sigma points `x`, `x + gamma * S_i`, `x - gamma * S_i` from the
/// columns `S_i` of the lower-triangular factor of `p`.
///
/// A rank-deficient `p` (including exactly zero) is fine: columns with a
/// zero pivot simply contribute no spread. If the factorization fails
/// outright, diagonal jitter of `1e-12 * trace(p) / L` is added once and
/// the factorization retried; a second failure is reported.
pub fn draw_sigma_points(
    x: &StateVector,
    p: &StateCovariance,
    gamma: f64,
) -> Result<SigmaPoints, FilterError> {
    let trace = p.trace();
    let pivot_tol = (1e-10 * trace.abs() / STATE_DIM as f64).max(f64::MIN_POSITIVE);
    let factor = match psd_cholesky(p, pivot_tol) {
        Some(l) => l,
        None => {
            let mut repaired = *p;
            let jitter = 1e-12 * trace / STATE_DIM as f64;
            for i in 0..STATE_DIM {
                repaired[(i, i)] += jitter;
            }
            symmetrize(&mut repaired);
            psd_cholesky(&repaired, pivot_tol).ok_or(FilterError::CholeskyFailure)?
        }
    };

    let mut points = [*x; SIGMA_COUNT];
    for i in 0..STATE_DIM {
        let offset = factor.column(i) * gamma;
        points[1 + i] = x + offset;
        points[1 + STATE_DIM + i] = x - offset;
    }
    Ok(SigmaPoints { points })
}

/// Discrete process model shared by both estimators: the quaternion
/// block is advanced by the bias-corrected rate held constant over the
/// step, the bias block is constant.
pub fn process_step(x: &StateVector, gyro_meas: Vec3, dt: f64) -> StateVector {
    let omega = gyro_meas - Vec3::new(x[4], x[5], x[6]);
    let q = rotation_step([x[0], x[1], x[2], x[3]], omega, dt);
    let mut out = *x;
    out[0] = q[0];
    out[1] = q[1];
    out[2] = q[2];
    out[3] = q[3];
    out
}

/// Observation model on the raw state polynomials: the four
/// direction-cosine terms of the attitude block.
pub fn observed_terms_raw(x: &StateVector) -> ObsVec {
    let (w, qx, qy, qz) = (x[0], x[1], x[2], x[3]);
    ObsVec::from_column_slice(&[
        2.0 * (qx * qz - w * qy),
        2.0 * (qy * qz + w * qx),
        w * w + qx * qx - qy * qy - qz * qz,
        2.0 * (qx * qy + w * qz),
    ])
}

/// Observation model with the quaternion block renormalized first; the
/// terms are quadratic, so this is the raw value divided by the squared
/// quaternion norm.
pub fn observed_terms_normalized(x: &StateVector) -> ObsVec {
    let nsq = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    let raw = observed_terms_raw(x);
    if nsq > 1e-30 {
        raw / nsq
    } else {
        raw
    }
}

/// Weighted sigma-point mean, accumulated as deviations from the central
/// point so the huge cancelling weights of small-alpha scalings do not
/// lose precision.
fn weighted_mean<const M: usize>(points: &[SVector<f64, M>; SIGMA_COUNT], w: &Weights) -> SVector<f64, M> {
    let mut dev_sum = SVector::<f64, M>::zeros();
    for point in points.iter().skip(1) {
        dev_sum += point - points[0];
    }
    points[0] + dev_sum * w.rest
}

fn weighted_cov<const M: usize>(
    points: &[SVector<f64, M>; SIGMA_COUNT],
    mean: &SVector<f64, M>,
    w: &Weights,
    noise: &SMatrix<f64, M, M>,
) -> SMatrix<f64, M, M> {
    let dev0 = points[0] - mean;
    let mut cov = dev0 * dev0.transpose() * w.cov0;
    for point in points.iter().skip(1) {
        let dev = point - mean;
        cov += dev * dev.transpose() * w.rest;
    }
    cov + noise
}

fn weighted_cross_cov<const M: usize>(
    xs: &[StateVector; SIGMA_COUNT],
    x_mean: &StateVector,
    ys: &[SVector<f64, M>; SIGMA_COUNT],
    y_mean: &SVector<f64, M>,
    w: &Weights,
) -> SMatrix<f64, STATE_DIM, M> {
    let mut cov = (xs[0] - x_mean) * (ys[0] - y_mean).transpose() * w.cov0;
    for i in 1..SIGMA_COUNT {
        cov += (xs[i] - x_mean) * (ys[i] - y_mean).transpose() * w.rest;
    }
    cov
}

/// Time update through an arbitrary process map. No quaternion handling;
/// see [`propagate`] for the attitude-specific wrapper.
pub fn propagate_with<F>(
    state: &FilterState,
    process: F,
    params: &UkfParams,
    process_noise: &StateCovariance,
) -> Result<FilterState, FilterError>
where
    F: Fn(&StateVector) -> StateVector,
{
    let w = params.weights()?;
    let sigma = draw_sigma_points(&state.x, &state.p, params.gamma())?;

    let mut advanced = sigma.points;
    for point in advanced.iter_mut() {
        *point = process(point);
    }

    let mean = weighted_mean(&advanced, &w);
    let mut p = weighted_cov(&advanced, &mean, &w, process_noise);
    symmetrize(&mut p);
    Ok(FilterState { x: mean, p })
}

/// Measurement update through an arbitrary observation map. No
/// quaternion handling; see [`correct`] for the attitude-specific
/// wrapper.
pub fn correct_with<H>(
    state: &FilterState,
    observe: H,
    measurement: &ObsVec,
    params: &UkfParams,
    observation_noise: &ObsCovariance,
) -> Result<FilterState, FilterError>
where
    H: Fn(&StateVector) -> ObsVec,
{
    let w = params.weights()?;
    // Redraw from the a-priori statistics so the propagated process
    // noise shapes the observation spread.
    let sigma = draw_sigma_points(&state.x, &state.p, params.gamma())?;

    let mut observed = [ObsVec::zeros(); SIGMA_COUNT];
    for (out, point) in observed.iter_mut().zip(sigma.points.iter()) {
        *out = observe(point);
    }

    let y_mean = weighted_mean(&observed, &w);
    let mut p_yy = weighted_cov(&observed, &y_mean, &w, observation_noise);
    symmetrize(&mut p_yy);
    let p_xy = weighted_cross_cov(&sigma.points, &state.x, &observed, &y_mean, &w);

    let (min_eig, max_eig) = symmetric_eigen_bounds(&p_yy);
    if min_eig <= 0.0 || max_eig / min_eig > MAX_INNOVATION_CONDITION {
        return Err(FilterError::SingularInnovationCovariance);
    }
    let p_yy_inv = nalgebra::Cholesky::new(p_yy)
        .ok_or(FilterError::SingularInnovationCovariance)?
        .inverse();

    let gain = p_xy * p_yy_inv;
    let x = state.x + gain * (measurement - y_mean);
    let mut p = state.p - gain * p_yy * gain.transpose();
    symmetrize(&mut p);
    Ok(FilterState { x, p })
}

/// Time update of the attitude filter: each sigma point's quaternion
/// block is advanced with the rate corrected by that point's own bias
/// block, the quaternion block of the resulting mean is renormalized.
pub fn propagate(
    state: &FilterState,
    gyro_meas: Vec3,
    dt: f64,
    params: &UkfParams,
    noise: &NoiseCovariances,
) -> Result<FilterState, FilterError> {
    let mut out = propagate_with(
        state,
        |x| process_step(x, gyro_meas, dt),
        params,
        &noise.process,
    )?;
    out.renormalize_quaternion();
    Ok(out)
}

/// Measurement update of the attitude filter against four observed
/// direction-cosine terms.
pub fn correct(
    state: &FilterState,
    observation: &ObservationVector,
    params: &UkfParams,
    noise: &NoiseCovariances,
) -> Result<FilterState, FilterError> {
    let y = ObsVec::from_column_slice(&[
        observation.c13,
        observation.c23,
        observation.c11,
        observation.c12,
    ]);
    let mut out = correct_with(
        state,
        observed_terms_normalized,
        &y,
        params,
        &noise.observation,
    )?;
    out.renormalize_quaternion();
    Ok(out)
}

/// Expected observation under the a-priori statistics (the weighted mean
/// of the observed sigma points), useful for innovation diagnostics.
pub fn predicted_observation(
    state: &FilterState,
    params: &UkfParams,
) -> Result<ObsVec, FilterError> {
    let w = params.weights()?;
    let sigma = draw_sigma_points(&state.x, &state.p, params.gamma())?;
    let mut observed = [ObsVec::zeros(); SIGMA_COUNT];
    for (out, point) in observed.iter_mut().zip(sigma.points.iter()) {
        *out = observed_terms_normalized(point);
    }
    Ok(weighted_mean(&observed, &w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::EulerAngles;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn default_noise() -> NoiseCovariances {
        NoiseCovariances::default()
    }

    #[test]
    fn weights_for_unit_alpha() {
        let p = UkfParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        };
        let w = p.weights().unwrap();
        assert_abs_diff_eq!(w.mean0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.rest, 1.0 / 14.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.cov0, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_for_small_alpha_pin_lambda_definition() {
        let p = UkfParams {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        };
        assert_abs_diff_eq!(p.lambda(), 7e-6 - 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.gamma(), (7e-6_f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mean_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let p = UkfParams {
                alpha: rng.random_range(1e-4..1.0),
                beta: rng.random_range(0.0..4.0),
                kappa: rng.random_range(0.0..3.0),
            };
            let w = p.weights().unwrap();
            let sum = w.mean0 + 2.0 * STATE_DIM as f64 * w.rest;
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            // The covariance weights obey the same identity once the
            // beta/alpha term is taken back off the central weight.
            let cov_sum = (w.cov0 - (1.0 - p.alpha * p.alpha + p.beta))
                + 2.0 * STATE_DIM as f64 * w.rest;
            assert_abs_diff_eq!(cov_sum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad_alpha = UkfParams {
            alpha: 0.0,
            ..UkfParams::default()
        };
        assert_eq!(bad_alpha.weights().unwrap_err(), FilterError::InvalidParams);
        let bad_kappa = UkfParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: -8.0,
        };
        assert_eq!(bad_kappa.weights().unwrap_err(), FilterError::InvalidParams);
    }

    #[test]
    fn zero_covariance_collapses_sigma_points() {
        let x = StateVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.1, -0.2, 0.3]);
        let sigma = draw_sigma_points(&x, &StateCovariance::zeros(), 2.0).unwrap();
        for point in sigma.points.iter() {
            assert_eq!(point, &x);
        }
    }

    #[test]
    fn diagonal_covariance_spreads_along_axes() {
        let x = StateVector::zeros();
        let mut p = StateCovariance::zeros();
        for i in 0..STATE_DIM {
            p[(i, i)] = (i + 1) as f64;
        }
        let gamma = 3.0;
        let sigma = draw_sigma_points(&x, &p, gamma).unwrap();
        for i in 0..STATE_DIM {
            let expect = gamma * ((i + 1) as f64).sqrt();
            assert_abs_diff_eq!(sigma.points[1 + i][i], expect, epsilon = 1e-12);
            assert_abs_diff_eq!(sigma.points[1 + STATE_DIM + i][i], -expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn sigma_points_match_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let params = UkfParams::default();
        let w = params.weights().unwrap();
        for _ in 0..50 {
            let x = StateVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
            // Random SPD matrix.
            let a = StateCovariance::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let p = a * a.transpose() + StateCovariance::identity() * 1e-3;
            let sigma = draw_sigma_points(&x, &p, params.gamma()).unwrap();

            let mean = weighted_mean(&sigma.points, &w);
            assert!((mean - x).amax() < 1e-10, "mean mismatch {}", (mean - x).amax());

            // Reconstructed covariance (no noise, identity map) should
            // reproduce p; cov0 includes the beta term, so compare with
            // the mean-weight identity instead: sum_i w_rest * dev_i^2
            // over the symmetric points alone reconstructs p.
            let mut recon = StateCovariance::zeros();
            for point in sigma.points.iter().skip(1) {
                let dev = point - x;
                recon += dev * dev.transpose() * w.rest;
            }
            assert!(
                (recon - p).amax() < 1e-10,
                "cov mismatch {}",
                (recon - p).amax()
            );
        }
    }

    #[test]
    fn propagate_zero_rate_keeps_mean_and_grows_covariance() {
        let state = FilterState::new(
            Quaternion::from_euler(EulerAngles::new(0.2, -0.1, 0.5)),
            Vec3::ZERO,
            StateCovariance::zeros(),
        );
        let noise = default_noise();
        let out = propagate(&state, Vec3::ZERO, 0.01, &UkfParams::default(), &noise).unwrap();
        let q0 = state.attitude();
        let q1 = out.attitude();
        assert!(q0.angle_to(&q1) < 1e-12);
        assert!((out.p - noise.process).abs().max() < 1e-12);
    }

    #[test]
    fn propagate_with_zero_covariance_reduces_to_deterministic_step() {
        let state = FilterState::new(Quaternion::IDENTITY, Vec3::ZERO, StateCovariance::zeros());
        let out = propagate(
            &state,
            Vec3::new(PI, 0.0, 0.0),
            0.5,
            &UkfParams::default(),
            &default_noise(),
        )
        .unwrap();
        let want = Quaternion::IDENTITY.propagate(Vec3::new(PI, 0.0, 0.0), 0.5);
        assert!(out.attitude().angle_to(&want) < 1e-12);
    }

    #[test]
    fn bias_uncertainty_produces_cross_covariance_matching_monte_carlo() {
        // Start from exact attitude with bias spread only; after
        // propagation the quaternion and bias blocks must be correlated.
        // Cross-checked against a dense Monte Carlo of the same
        // Gaussian through the same process model.
        let sigma_b = 0.05;
        let dt = 0.5;
        let gyro = Vec3::new(0.4, -0.3, 0.6);
        let mut p0 = StateCovariance::zeros();
        for i in 4..STATE_DIM {
            p0[(i, i)] = sigma_b * sigma_b;
        }
        let state = FilterState::new(Quaternion::IDENTITY, Vec3::ZERO, p0);
        let zero_noise = NoiseCovariances::diagonal(0.0, 0.0, 1.0);
        let out = propagate(&state, gyro, dt, &UkfParams::default(), &zero_noise).unwrap();

        let qb_block = out.p.fixed_view::<4, 3>(0, 4).into_owned();
        assert!(
            qb_block.amax() > 1e-4,
            "no quaternion/bias coupling developed: {qb_block}"
        );

        // Monte Carlo oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let n = 20_000;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = state.x;
            for i in 4..STATE_DIM {
                // Box-Muller.
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                x[i] += sigma_b * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
            }
            samples.push(process_step(&x, gyro, dt));
        }
        let mut mc_mean = StateVector::zeros();
        for s in &samples {
            mc_mean += s;
        }
        mc_mean /= n as f64;
        let mut mc_cov = StateCovariance::zeros();
        for s in &samples {
            let d = s - mc_mean;
            mc_cov += d * d.transpose();
        }
        mc_cov /= n as f64 - 1.0;

        let mc_qb = mc_cov.fixed_view::<4, 3>(0, 4).into_owned();
        let diff = (qb_block - mc_qb).amax();
        let scale = mc_qb.amax();
        assert!(
            diff < 0.08 * scale + 1e-5,
            "cross-covariance off by {diff} (scale {scale})"
        );
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_covariance() {
        let params = UkfParams::default();
        let noise = default_noise();
        let mut p = FilterState::initial_covariance(1e-3, 0.02);
        symmetrize(&mut p);
        let state = FilterState::new(
            Quaternion::from_euler(EulerAngles::new(0.1, 0.05, -0.3)),
            Vec3::new(0.01, -0.01, 0.02),
            p,
        );
        let y = predicted_observation(&state, &params).unwrap();
        let obs = ObservationVector {
            c13: y[0],
            c23: y[1],
            c11: y[2],
            c12: y[3],
        };
        let out = correct(&state, &obs, &params, &noise).unwrap();
        assert!((out.x - state.x).amax() < 1e-9);
        assert!(out.p.trace() < state.p.trace());
    }

    #[test]
    fn correction_contracts_attitude_error() {
        // Truth is the identity attitude; the prior is 5 degrees of roll
        // error. An exact observation must strictly reduce the error.
        let params = UkfParams::default();
        let noise = NoiseCovariances::diagonal(1e-6, 0.0, 1e-8);
        let prior_err = 5.0_f64.to_radians();
        let state = FilterState::new(
            Quaternion::from_euler(EulerAngles::new(prior_err, 0.0, 0.0)),
            Vec3::ZERO,
            FilterState::initial_covariance(1e-2, 0.05),
        );
        let obs = ObservationVector {
            c13: 0.0,
            c23: 0.0,
            c11: 1.0,
            c12: 0.0,
        };
        let out = correct(&state, &obs, &params, &noise).unwrap();
        let roll = out.attitude().to_euler().roll.abs();
        assert!(
            roll < prior_err,
            "posterior roll error {roll} not contracted from {prior_err}"
        );
        assert!(roll < 0.5_f64.to_radians());
    }

    #[test]
    fn correction_agrees_with_particle_reweighting_oracle() {
        // Moderate covariances so a 100k-particle importance-weighted
        // posterior is well conditioned, then compare posterior means.
        let params = UkfParams::default();
        let r_var = 1e-4;
        let noise = NoiseCovariances::diagonal(0.0, 0.0, r_var);
        let q_var = 4e-4;
        let state = FilterState::new(
            Quaternion::from_euler(EulerAngles::new(0.05, 0.0, 0.0)),
            Vec3::ZERO,
            FilterState::initial_covariance(q_var, 1e-3),
        );
        let y = ObsVec::from_column_slice(&[0.0, 0.0, 1.0, 0.0]);

        let obs = ObservationVector {
            c13: y[0],
            c23: y[1],
            c11: y[2],
            c12: y[3],
        };
        let ukf_out = correct(&state, &obs, &params, &noise).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let n = 100_000;
        let mut weighted = StateVector::zeros();
        let mut total_w = 0.0;
        for _ in 0..n {
            let mut x = state.x;
            for i in 0..STATE_DIM {
                let sd = state.p[(i, i)].sqrt();
                if sd > 0.0 {
                    let u1: f64 = rng.random_range(1e-12..1.0);
                    let u2: f64 = rng.random_range(0.0..1.0);
                    x[i] += sd * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
                }
            }
            let innov = y - observed_terms_normalized(&x);
            let log_w = -0.5 * innov.dot(&innov) / r_var;
            let w = log_w.exp();
            weighted += x * w;
            total_w += w;
        }
        let particle_mean = weighted / total_w;

        let ukf_q = ukf_out.attitude().normalized();
        let pf_q = Quaternion::new(
            particle_mean[0],
            particle_mean[1],
            particle_mean[2],
            particle_mean[3],
        )
        .normalized();
        let angle = ukf_q.angle_to(&pf_q);
        assert!(
            angle < 0.01,
            "posterior mean attitude differs from particle oracle by {} rad",
            angle
        );
    }

    #[test]
    fn constant_yaw_gyro_bias_is_learned_from_corrections() {
        // Closed loop with noise-free sensors: truth holds level flight,
        // the gyro reports a constant 3 deg/s yaw bias. One-second
        // correction cadence must pull the bias estimate within
        // 0.3 deg/s of truth inside 120 s.
        let params = UkfParams::default();
        let noise = default_noise();
        let bias_true = Vec3::new(0.0, 0.0, 3.0_f64.to_radians());
        let dt = 0.01;

        let mut truth = Quaternion::IDENTITY;
        let mut state = FilterState::new(
            Quaternion::IDENTITY,
            Vec3::ZERO,
            FilterState::initial_covariance(1e-2, 5.0_f64.to_radians()),
        );

        let mut converged_at = None;
        for step in 1..=12_000 {
            let omega_true = Vec3::ZERO;
            truth = truth.propagate(omega_true, dt);
            let gyro = omega_true + bias_true;
            state = propagate(&state, gyro, dt, &params, &noise).unwrap();

            if step % 100 == 0 {
                let d = truth.to_dcm();
                let obs = crate::triad::observe(&d);
                state = correct(&state, &obs, &params, &noise).unwrap();
                let err = (state.bias() - bias_true).norm();
                if err < 0.3_f64.to_radians() {
                    converged_at = converged_at.or(Some(step as f64 * dt));
                }
            }
        }
        let err = (state.bias() - bias_true).norm().to_degrees();
        assert!(err < 0.3, "final bias error {err} deg/s");
        assert!(
            converged_at.unwrap_or(f64::INFINITY) <= 120.0,
            "bias converged only after {converged_at:?} s"
        );
    }

    #[test]
    fn covariance_stays_healthy_over_random_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let params = UkfParams::default();
        let noise = default_noise();
        let mut state = FilterState::new(
            Quaternion::IDENTITY,
            Vec3::ZERO,
            FilterState::initial_covariance(1e-2, 0.09),
        );
        let mut truth = Quaternion::IDENTITY;
        for step in 0..2000 {
            let omega = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            truth = truth.propagate(omega, 0.01);
            state = propagate(&state, omega, 0.01, &params, &noise).unwrap();
            if step % 100 == 99 {
                let obs = crate::triad::observe(&truth.to_dcm());
                state = correct(&state, &obs, &params, &noise).unwrap();
            }

            // Symmetry within 1e-12 and eigenvalues not meaningfully
            // negative.
            assert!((state.p - state.p.transpose()).amax() <= 1e-12);
            let (min_eig, _) = symmetric_eigen_bounds(&state.p);
            assert!(min_eig >= -1e-10 * state.p.trace());
            // Quaternion block of the mean stays unit.
            assert!((state.attitude().norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn singular_innovation_is_reported() {
        // Zero covariance and zero observation noise make the
        // innovation covariance exactly singular.
        let state = FilterState::new(Quaternion::IDENTITY, Vec3::ZERO, StateCovariance::zeros());
        let noise = NoiseCovariances::diagonal(0.0, 0.0, 0.0);
        let obs = ObservationVector {
            c13: 0.0,
            c23: 0.0,
            c11: 1.0,
            c12: 0.0,
        };
        assert_eq!(
            correct(&state, &obs, &UkfParams::default(), &noise).unwrap_err(),
            FilterError::SingularInnovationCovariance
        );
    }
}
