//! EKF-SLAM over a joint robot-pose + landmark state.
//!
//! The state vector is `[x, y, phi, m1_x, m1_y, ..., mn_x, mn_y]` with a full
//! `(3 + 2n)` covariance. Measurements are landmark positions expressed in the
//! robot frame; the measurement update is iterated (relinearizing about the
//! latest iterate while holding the prior fixed), with two passes by default.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

/// Default number of relinearization passes in [`SlamState::update`].
pub const DEFAULT_UPDATE_ITERATIONS: usize = 2;

const POSE_DIM: usize = 3;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a - std::f64::consts::TAU
    } else {
        a
    }
}

/// Robot pose in the global frame. Heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }

    /// Rotation matrix mapping robot-frame vectors into the global frame.
    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.phi.sin_cos();
        Matrix2::new(c, -s, s, c)
    }
}

/// Motion command in the robot frame: forward, lateral, and heading change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub du: f64,
    pub dv: f64,
    pub dphi: f64,
}

impl ControlInput {
    pub fn new(du: f64, dv: f64, dphi: f64) -> Self {
        Self { du, dv, dphi }
    }
}

/// Process and measurement noise configuration.
///
/// `q` covers the pose block only (landmarks carry no process noise),
/// `r_meas` is the per-observation measurement covariance, and `w_bias` is a
/// fixed additive offset on the predicted measurement (zero by default).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub q: Matrix3<f64>,
    pub r_meas: Matrix2<f64>,
    pub w_bias: Vector2<f64>,
}

impl NoiseModel {
    pub fn new(q: Matrix3<f64>, r_meas: Matrix2<f64>) -> Self {
        Self {
            q,
            r_meas,
            w_bias: Vector2::zeros(),
        }
    }

    pub fn with_bias(mut self, w_bias: Vector2<f64>) -> Self {
        self.w_bias = w_bias;
        self
    }
}

/// A single landmark observation in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkObservation {
    pub target: ObservedLandmark,
    pub z: Vector2<f64>,
}

/// Which landmark an observation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservedLandmark {
    Existing(usize),
    New,
}

impl LandmarkObservation {
    pub fn existing(index: usize, z: Vector2<f64>) -> Self {
        Self {
            target: ObservedLandmark::Existing(index),
            z,
        }
    }

    pub fn new_landmark(z: Vector2<f64>) -> Self {
        Self {
            target: ObservedLandmark::New,
            z,
        }
    }
}

/// Joint robot + landmark estimate with full covariance.
#[derive(Debug, Clone)]
pub struct SlamState {
    pub pose: RobotPose,
    pub landmarks: Vec<Vector2<f64>>,
    pub cov: DMatrix<f64>,
    pub step: u64,
}

impl SlamState {
    /// Start a filter at `pose` with the given pose covariance and no landmarks.
    pub fn new(pose: RobotPose, pose_cov: Matrix3<f64>) -> Self {
        let mut cov = DMatrix::zeros(POSE_DIM, POSE_DIM);
        cov.view_mut((0, 0), (POSE_DIM, POSE_DIM))
            .copy_from(&pose_cov);
        Self {
            pose,
            landmarks: Vec::new(),
            cov,
            step: 0,
        }
    }

    pub fn landmark_count(&self) -> usize {
        self.landmarks.len()
    }

    /// Full state dimension, `3 + 2 * landmark_count`.
    pub fn dim(&self) -> usize {
        POSE_DIM + 2 * self.landmarks.len()
    }

    /// State mean as a dense vector `[x, y, phi, m1_x, m1_y, ...]`.
    pub fn state_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = self.pose.x;
        v[1] = self.pose.y;
        v[2] = self.pose.phi;
        for (i, lm) in self.landmarks.iter().enumerate() {
            v[POSE_DIM + 2 * i] = lm.x;
            v[POSE_DIM + 2 * i + 1] = lm.y;
        }
        v
    }

    /// Pose covariance block.
    pub fn pose_cov(&self) -> Matrix3<f64> {
        self.cov.fixed_view::<3, 3>(0, 0).into()
    }

    fn from_vector(v: &DVector<f64>, cov: DMatrix<f64>, step: u64) -> Self {
        let n = (v.len() - POSE_DIM) / 2;
        let landmarks = (0..n)
            .map(|i| Vector2::new(v[POSE_DIM + 2 * i], v[POSE_DIM + 2 * i + 1]))
            .collect();
        Self {
            pose: RobotPose::new(v[0], v[1], v[2]),
            landmarks,
            cov,
            step,
        }
    }

    /// Predicted robot-frame position of landmark `landmark_index`:
    /// `R(phi)^T (m - p) + w_bias`.
    pub fn measurement_model(
        &self,
        landmark_index: usize,
        noise: &NoiseModel,
    ) -> Result<Vector2<f64>> {
        self.check_index(landmark_index)?;
        let x = self.state_vector();
        Ok(measurement_at(&x, landmark_index) + noise.w_bias)
    }

    /// Jacobian of the motion model w.r.t. the full state, evaluated at `self`.
    ///
    /// The landmark block is identity; only the pose block depends on the
    /// control because the control is expressed in the robot frame.
    pub fn motion_jacobian(&self, u: &ControlInput) -> DMatrix<f64> {
        let dim = self.dim();
        let mut f = DMatrix::identity(dim, dim);
        let (s, c) = self.pose.phi.sin_cos();
        f[(0, 2)] = -s * u.du - c * u.dv;
        f[(1, 2)] = c * u.du - s * u.dv;
        f
    }

    /// Jacobian of [`SlamState::measurement_model`] w.r.t. the full state.
    ///
    /// Nonzero only in the pose columns and the observed landmark's columns.
    pub fn measurement_jacobian(&self, landmark_index: usize) -> Result<DMatrix<f64>> {
        self.check_index(landmark_index)?;
        let x = self.state_vector();
        let mut h = DMatrix::zeros(2, self.dim());
        fill_measurement_jacobian(&x, landmark_index, &mut h, 0);
        Ok(h)
    }

    /// Propagate the pose by `u` and inflate the covariance: `P <- F P F^T + Q`.
    pub fn predict(&self, u: &ControlInput, noise: &NoiseModel) -> SlamState {
        let f = self.motion_jacobian(u);
        let mut cov = &f * &self.cov * f.transpose();
        for i in 0..POSE_DIM {
            for j in 0..POSE_DIM {
                cov[(i, j)] += noise.q[(i, j)];
            }
        }
        symmetrize(&mut cov);

        let (s, c) = self.pose.phi.sin_cos();
        let pose = RobotPose::new(
            self.pose.x + c * u.du - s * u.dv,
            self.pose.y + s * u.du + c * u.dv,
            self.pose.phi + u.dphi,
        );
        SlamState {
            pose,
            landmarks: self.landmarks.clone(),
            cov,
            step: self.step + 1,
        }
    }

    /// Iterated measurement update over a batch of existing-landmark
    /// observations.
    ///
    /// Runs up to `n_iter` gain/update passes, relinearizing the measurement
    /// Jacobian about the latest iterate while keeping the prior mean and
    /// covariance fixed. Passes after the first are accepted only while they
    /// do not increase the measurement residual (the usual step guard on the
    /// iterated update), so extra passes never fit the measurements worse.
    /// The covariance is folded in once, from the last accepted
    /// linearization, in Joseph form, then re-symmetrized.
    pub fn update(
        &self,
        obs: &[LandmarkObservation],
        noise: &NoiseModel,
        n_iter: usize,
    ) -> Result<SlamState> {
        if n_iter == 0 {
            return Err(Error::ZeroIterations);
        }
        if obs.is_empty() {
            return Ok(self.clone());
        }
        let mut indices = Vec::with_capacity(obs.len());
        for ob in obs {
            match ob.target {
                ObservedLandmark::Existing(i) => {
                    self.check_index(i)?;
                    indices.push(i);
                }
                ObservedLandmark::New => return Err(Error::NewLandmarkInUpdate),
            }
        }

        let dim = self.dim();
        let m = 2 * obs.len();
        let x_prior = self.state_vector();
        let p_prior = &self.cov;

        let mut z = DVector::zeros(m);
        let mut r = DMatrix::zeros(m, m);
        for (k, ob) in obs.iter().enumerate() {
            z[2 * k] = ob.z.x;
            z[2 * k + 1] = ob.z.y;
            r.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&noise.r_meas);
        }

        // Iterate on an unwrapped copy of the mean; wrapping mid-iteration
        // would corrupt the (x_prior - x_i) term across the pi boundary.
        let mut x_iter = x_prior.clone();
        let mut gain = DMatrix::zeros(dim, m);
        let mut h = DMatrix::zeros(m, dim);

        let residual_norm = |x: &DVector<f64>| -> f64 {
            indices
                .iter()
                .enumerate()
                .map(|(k, &idx)| {
                    let pred = measurement_at(x, idx) + noise.w_bias;
                    (z[2 * k] - pred.x).powi(2) + (z[2 * k + 1] - pred.y).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };

        for pass in 0..n_iter {
            let mut h_next = DMatrix::zeros(m, dim);
            let mut z_pred = DVector::zeros(m);
            for (k, &idx) in indices.iter().enumerate() {
                let pred = measurement_at(&x_iter, idx) + noise.w_bias;
                z_pred[2 * k] = pred.x;
                z_pred[2 * k + 1] = pred.y;
                fill_measurement_jacobian(&x_iter, idx, &mut h_next, 2 * k);
            }

            let s = &h_next * p_prior * h_next.transpose() + &r;
            let chol = s.clone().cholesky().ok_or(Error::SingularInnovation)?;
            let gain_next = p_prior * h_next.transpose() * chol.inverse();

            let residual = &z - &z_pred - &h_next * (&x_prior - &x_iter);
            let x_next = &x_prior + &gain_next * residual;

            if pass > 0 && residual_norm(&x_next) > residual_norm(&x_iter) + 1e-12 {
                break;
            }
            x_iter = x_next;
            gain = gain_next;
            h = h_next;
        }

        // Joseph form with the last accepted linearization; algebraically
        // equal to (I - KH)P.
        let i_kh = DMatrix::identity(dim, dim) - &gain * &h;
        let mut cov = &i_kh * p_prior * i_kh.transpose() + &gain * &r * gain.transpose();
        symmetrize(&mut cov);

        Ok(SlamState::from_vector(&x_iter, cov, self.step))
    }

    /// Append a newly observed landmark to the state.
    ///
    /// The landmark is initialized at `pose (+) R z`, and the covariance grows
    /// by the linearized initialization Jacobians: the new diagonal block is
    /// `G_p P_pp G_p^T + G_z R G_z^T`, cross blocks `G_p P[pose, :]`.
    pub fn augment(&self, obs: &LandmarkObservation, noise: &NoiseModel) -> Result<SlamState> {
        if obs.target != ObservedLandmark::New {
            return Err(Error::ExistingLandmarkInAugment);
        }
        let (s, c) = self.pose.phi.sin_cos();
        let rot = self.pose.rotation();
        let global = Vector2::new(self.pose.x, self.pose.y) + rot * obs.z;

        // d(global)/d(pose) and d(global)/d(z).
        let g_pose = nalgebra::Matrix2x3::new(
            1.0,
            0.0,
            -s * obs.z.x - c * obs.z.y,
            0.0,
            1.0,
            c * obs.z.x - s * obs.z.y,
        );
        let g_z = rot;

        let old_dim = self.dim();
        let new_dim = old_dim + 2;
        let mut cov = DMatrix::zeros(new_dim, new_dim);
        cov.view_mut((0, 0), (old_dim, old_dim)).copy_from(&self.cov);

        let p_pose_rows = self.cov.view((0, 0), (POSE_DIM, old_dim));
        let cross = &g_pose * p_pose_rows; // 2 x old_dim
        cov.view_mut((old_dim, 0), (2, old_dim)).copy_from(&cross);
        cov.view_mut((0, old_dim), (old_dim, 2))
            .copy_from(&cross.transpose());

        let p_pp: Matrix3<f64> = self.cov.fixed_view::<3, 3>(0, 0).into();
        let block = &g_pose * p_pp * g_pose.transpose() + g_z * noise.r_meas * g_z.transpose();
        cov.view_mut((old_dim, old_dim), (2, 2)).copy_from(&block);
        symmetrize(&mut cov);

        let mut landmarks = self.landmarks.clone();
        landmarks.push(global);
        Ok(SlamState {
            pose: self.pose,
            landmarks,
            cov,
            step: self.step,
        })
    }

    /// Check the structural invariants: covariance square of the right size,
    /// symmetric to 1e-9, and no eigenvalue below -1e-10.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.cov.nrows() != dim || self.cov.ncols() != dim {
            return Err(Error::InvalidParameter {
                name: "cov",
                reason: format!("expected {dim}x{dim}, got {}x{}", self.cov.nrows(), self.cov.ncols()),
            });
        }
        let asym = max_asymmetry(&self.cov);
        if asym > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "cov",
                reason: format!("asymmetry {asym:e} exceeds 1e-9"),
            });
        }
        let min_eig = self
            .cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidParameter {
                name: "cov",
                reason: format!("eigenvalue {min_eig:e} below -1e-10"),
            });
        }
        if self.pose.phi <= -std::f64::consts::PI || self.pose.phi > std::f64::consts::PI {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("{} outside (-pi, pi]", self.pose.phi),
            });
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.landmarks.len() {
            Err(Error::LandmarkIndexOutOfRange {
                index,
                count: self.landmarks.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Bias-free measurement prediction from a raw state vector.
fn measurement_at(x: &DVector<f64>, landmark_index: usize) -> Vector2<f64> {
    let (s, c) = x[2].sin_cos();
    let dx = x[POSE_DIM + 2 * landmark_index] - x[0];
    let dy = x[POSE_DIM + 2 * landmark_index + 1] - x[1];
    Vector2::new(c * dx + s * dy, -s * dx + c * dy)
}

/// Write the 2-row measurement Jacobian for one landmark into `h` at `row`.
fn fill_measurement_jacobian(x: &DVector<f64>, landmark_index: usize, h: &mut DMatrix<f64>, row: usize) {
    let (s, c) = x[2].sin_cos();
    let dx = x[POSE_DIM + 2 * landmark_index] - x[0];
    let dy = x[POSE_DIM + 2 * landmark_index + 1] - x[1];
    let col = POSE_DIM + 2 * landmark_index;

    h[(row, 0)] = -c;
    h[(row, 1)] = -s;
    h[(row, 2)] = -s * dx + c * dy;
    h[(row, col)] = c;
    h[(row, col + 1)] = s;

    h[(row + 1, 0)] = s;
    h[(row + 1, 1)] = -c;
    h[(row + 1, 2)] = -c * dx - s * dy;
    h[(row + 1, col)] = -s;
    h[(row + 1, col + 1)] = c;
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn noiseless() -> NoiseModel {
        NoiseModel::new(Matrix3::zeros(), Matrix2::identity() * 1e-4)
    }

    fn state_with_landmarks(pose: RobotPose, landmarks: &[(f64, f64)]) -> SlamState {
        let mut s = SlamState::new(pose, Matrix3::identity() * 0.01);
        let noise = noiseless();
        for &(x, y) in landmarks {
            // Place exactly by feeding the robot-frame coordinates.
            let z = pose.rotation().transpose() * (Vector2::new(x, y) - Vector2::new(pose.x, pose.y));
            s = s.augment(&LandmarkObservation::new_landmark(z), &noise).unwrap();
        }
        s
    }

    #[test]
    fn wrap_angle_bounds() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.1 - 4.0 * PI), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn measurement_identity_rotation() {
        let s = state_with_landmarks(RobotPose::new(0.0, 0.0, 0.0), &[(1.0, 0.0)]);
        let z = s.measurement_model(0, &noiseless()).unwrap();
        assert_abs_diff_eq!(z.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn measurement_quarter_turn() {
        // Heading pi/2: a landmark ahead on the global x axis appears at
        // (0, -1) in the robot frame.
        let s = state_with_landmarks(RobotPose::new(0.0, 0.0, FRAC_PI_2), &[(1.0, 0.0)]);
        let z = s.measurement_model(0, &noiseless()).unwrap();
        assert_abs_diff_eq!(z.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn measurement_bias_applied() {
        let s = state_with_landmarks(RobotPose::new(2.0, 3.0, 0.0), &[(2.0, 3.0)]);
        let noise = noiseless().with_bias(Vector2::new(0.1, 0.0));
        let z = s.measurement_model(0, &noise).unwrap();
        assert_abs_diff_eq!(z.x, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(z.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn measurement_index_out_of_range() {
        let s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::zeros());
        assert!(matches!(
            s.measurement_model(0, &noiseless()),
            Err(Error::LandmarkIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn motion_jacobian_zero_control_is_identity() {
        let s = state_with_landmarks(RobotPose::new(1.0, 2.0, 0.7), &[(3.0, 4.0)]);
        let f = s.motion_jacobian(&ControlInput::new(0.0, 0.0, 0.0));
        assert!((f - DMatrix::identity(5, 5)).abs().max() < 1e-15);
    }

    #[test]
    fn motion_jacobian_heading_column() {
        let s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::zeros());
        let f = s.motion_jacobian(&ControlInput::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(f[(0, 2)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[(1, 2)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn measurement_jacobian_structure() {
        let s = state_with_landmarks(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(1.0, 0.0), (5.0, -2.0)],
        );
        let h = s.measurement_jacobian(0).unwrap();
        // Pose-position block -I2, landmark block I2.
        assert_abs_diff_eq!(h[(0, 0)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 1)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(0, 3)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 4)], 1.0, epsilon = 1e-12);
        // Unobserved landmark columns all zero.
        for r in 0..2 {
            for c in 5..7 {
                assert_eq!(h[(r, c)], 0.0);
            }
        }
    }

    #[test]
    fn predict_zero_control_keeps_state() {
        let s = state_with_landmarks(RobotPose::new(0.3, -0.2, 0.4), &[(1.0, 1.0)]);
        let next = s.predict(&ControlInput::new(0.0, 0.0, 0.0), &noiseless());
        assert_eq!(next.step, s.step + 1);
        assert_abs_diff_eq!(next.pose.x, s.pose.x, epsilon = 1e-12);
        assert_abs_diff_eq!(next.pose.y, s.pose.y, epsilon = 1e-12);
        assert_abs_diff_eq!(next.pose.phi, s.pose.phi, epsilon = 1e-12);
        assert!((next.cov.clone() - s.cov.clone()).abs().max() < 1e-12);
    }

    #[test]
    fn predict_straight_dead_reckoning() {
        let s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::zeros());
        let next = s.predict(&ControlInput::new(1.0, 0.0, 0.0), &noiseless());
        assert_abs_diff_eq!(next.pose.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.pose.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.pose.phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_adds_process_noise_on_pose_block() {
        // P = I, zero control (F = I), Q = 0.1 I -> pose block 1.1 I.
        let mut s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::identity());
        s.cov = DMatrix::identity(3, 3);
        let noise = NoiseModel::new(Matrix3::identity() * 0.1, Matrix2::identity());
        let next = s.predict(&ControlInput::new(0.0, 0.0, 0.0), &noise);
        assert!((next.cov - DMatrix::identity(3, 3) * 1.1).abs().max() < 1e-12);
    }

    #[test]
    fn update_empty_is_noop() {
        let s = state_with_landmarks(RobotPose::new(0.0, 0.0, 0.0), &[(1.0, 0.0)]);
        let post = s.update(&[], &noiseless(), 2).unwrap();
        assert_eq!(post.step, s.step);
        assert_eq!(post.landmarks, s.landmarks);
        assert_eq!(post.pose, s.pose);
    }

    #[test]
    fn update_rejects_new_and_unknown() {
        let s = state_with_landmarks(RobotPose::new(0.0, 0.0, 0.0), &[(1.0, 0.0)]);
        let noise = noiseless();
        let err = s
            .update(&[LandmarkObservation::new_landmark(Vector2::zeros())], &noise, 1)
            .unwrap_err();
        assert!(matches!(err, Error::NewLandmarkInUpdate));
        let err = s
            .update(&[LandmarkObservation::existing(5, Vector2::zeros())], &noise, 1)
            .unwrap_err();
        assert!(matches!(err, Error::LandmarkIndexOutOfRange { .. }));
        let err = s
            .update(&[LandmarkObservation::existing(0, Vector2::zeros())], &noise, 0)
            .unwrap_err();
        assert!(matches!(err, Error::ZeroIterations));
    }

    #[test]
    fn update_small_noise_limit_pins_landmark() {
        // Exact measurement with r -> 0: the posterior landmark estimate must
        // land on the measured position mapped to the global frame.
        let pose = RobotPose::new(0.5, -0.3, 0.6);
        let mut s = state_with_landmarks(pose, &[(2.0, 1.0)]);
        // Perturb the landmark estimate away from the truth.
        s.landmarks[0] += Vector2::new(0.05, -0.04);
        let mut noise = noiseless();
        noise.r_meas = Matrix2::identity() * 1e-9;
        // True robot-frame position of the (2,1) point.
        let z = pose.rotation().transpose() * (Vector2::new(2.0, 1.0) - Vector2::new(0.5, -0.3));
        let post = s
            .update(&[LandmarkObservation::existing(0, z)], &noise, 2)
            .unwrap();
        let got = post.landmarks[0];
        let mapped = Vector2::new(post.pose.x, post.pose.y) + post.pose.rotation() * z;
        assert!((got - mapped).norm() < 1e-3, "residual {}", (got - mapped).norm());
    }

    #[test]
    fn augment_identity_and_rotated() {
        let noise = noiseless();
        let s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::zeros());
        let s = s
            .augment(&LandmarkObservation::new_landmark(Vector2::new(1.0, 0.0)), &noise)
            .unwrap();
        assert_abs_diff_eq!(s.landmarks[0].x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.landmarks[0].y, 0.0, epsilon = 1e-12);

        let s2 = SlamState::new(RobotPose::new(0.0, 0.0, FRAC_PI_2), Matrix3::zeros());
        let s2 = s2
            .augment(&LandmarkObservation::new_landmark(Vector2::new(1.0, 0.0)), &noise)
            .unwrap();
        assert_abs_diff_eq!(s2.landmarks[0].x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s2.landmarks[0].y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn augment_block_from_measurement_noise_only() {
        // Zero pose covariance, phi = 0, r = sigma^2 I -> new block sigma^2 I.
        let sigma2 = 0.04;
        let noise = NoiseModel::new(Matrix3::zeros(), Matrix2::identity() * sigma2);
        let s = SlamState::new(RobotPose::new(1.0, 2.0, 0.0), Matrix3::zeros());
        let s = s
            .augment(&LandmarkObservation::new_landmark(Vector2::new(3.0, -1.0)), &noise)
            .unwrap();
        let block = s.cov.view((3, 3), (2, 2)).clone_owned();
        assert!((block - DMatrix::identity(2, 2) * sigma2).abs().max() < 1e-12);
    }

    #[test]
    fn augment_rejects_existing() {
        let s = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::zeros());
        let err = s
            .augment(&LandmarkObservation::existing(0, Vector2::zeros()), &noiseless())
            .unwrap_err();
        assert!(matches!(err, Error::ExistingLandmarkInAugment));
    }

    #[test]
    fn augment_preserves_prior_entries() {
        let mut s = state_with_landmarks(RobotPose::new(0.1, 0.2, 0.3), &[(1.0, 2.0)]);
        for i in 0..5 {
            for j in 0..5 {
                s.cov[(i, j)] = 0.01 * ((i * 5 + j) as f64 + 1.0);
            }
        }
        let before = s.cov.clone();
        symmetrize(&mut s.cov);
        let before = (before.clone() + before.transpose()) * 0.5;
        let next = s
            .augment(&LandmarkObservation::new_landmark(Vector2::new(0.5, 0.5)), &noiseless())
            .unwrap();
        assert!((next.cov.view((0, 0), (5, 5)).clone_owned() - before).abs().max() < 1e-12);
        assert_eq!(next.dim(), 7);
    }
}
