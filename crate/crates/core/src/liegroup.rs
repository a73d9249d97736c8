//! SE(3) and se(3) primitives.
//!
//! Twists are ordered translation first: `x = [rho; phi]`, where `rho` is the
//! linear part and `phi` the angular part. Poses follow the left-acting
//! kinematics `dT/dt = varpi^ T`, so a [`Pose`] maps world coordinates into the
//! body frame (the robot's world position is `-R^T t`). Perturbations are
//! applied on the left: `T <- exp(delta^) T`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};

/// Generalized velocity, strain, or local pose perturbation (translation first).
pub type Twist = Vector6<f64>;
/// Local Markovian state `[xi; psi]` or an input pair `[v; a]`.
pub type Vector12 = SVector<f64, 12>;
pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Below this rotation angle the trigonometric coefficients switch to their
/// Taylor expansions.
const SERIES_ANGLE: f64 = 0.1;
/// Angles within this distance of pi are rejected by the logarithm.
const LOG_PI_MARGIN: f64 = 1e-6;
/// Angles within this distance of 2*pi are rejected by the inverse Jacobian.
const JAC_INV_MARGIN: f64 = 1e-6;

pub fn twist(linear: Vector3<f64>, angular: Vector3<f64>) -> Twist {
    Twist::new(
        linear.x, linear.y, linear.z, angular.x, angular.y, angular.z,
    )
}

pub fn linear(x: &Twist) -> Vector3<f64> {
    x.fixed_rows::<3>(0).into_owned()
}

pub fn angular(x: &Twist) -> Vector3<f64> {
    x.fixed_rows::<3>(3).into_owned()
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// The `^` operator: 4x4 matrix representation of a twist.
pub fn wedge(x: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&angular(x)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(x));
    m
}

/// Inverse of [`wedge`]; the skew block is antisymmetrized.
pub fn vee(m: &Matrix4<f64>) -> Twist {
    let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
    twist(m.fixed_view::<3, 1>(0, 3).into_owned(), unskew(&rot))
}

/// The curly-wedge (adjoint algebra) operator. `curlywedge(x) * y` is the Lie
/// bracket `[x, y]`.
pub fn curlywedge(x: &Twist) -> Matrix6<f64> {
    let phi = skew(&angular(x));
    let rho = skew(&linear(x));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&phi);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&rho);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&phi);
    m
}

/// A rigid transform in SE(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from its parts. The rotation must be orthonormal with unit
    /// determinant; use [`Pose::normalized`] to project a drifted matrix.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(
            (rotation.transpose() * rotation - Matrix3::identity()).norm() < 1e-6,
            "rotation is not orthonormal"
        );
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Builds the world-to-body pose from a body-to-world rotation and the body
    /// origin expressed in world coordinates.
    pub fn from_world(rotation_wb: Matrix3<f64>, position_w: Vector3<f64>) -> Self {
        let rotation = rotation_wb.transpose();
        Self {
            rotation,
            translation: -rotation * position_w,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Body origin in world coordinates.
    pub fn world_position(&self) -> Vector3<f64> {
        -self.rotation.transpose() * self.translation
    }

    /// Body-to-world rotation.
    pub fn world_rotation(&self) -> Matrix3<f64> {
        self.rotation.transpose()
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -rt * self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The 6x6 adjoint `Ad(T)` with `Ad(T) x = (T x^ T^-1)^v`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(skew(&self.translation) * self.rotation));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rotation);
        m
    }

    /// Projects the rotation onto the nearest orthonormal matrix (polar factor).
    pub fn normalized(&self) -> Self {
        Self {
            rotation: nearest_rotation(&self.rotation),
            translation: self.translation,
        }
    }

    /// Applies a left perturbation `exp(delta^) T` and re-orthonormalizes.
    pub fn perturbed(&self, delta: &Twist) -> Self {
        (exp_map(delta) * *self).normalized()
    }

    /// Rotation angle of the pose, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * v_t;
    }
    r
}

fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = unskew(r).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

// --- SO(3) helpers ---------------------------------------------------------

/// `sin(t)/t` and `(1 - cos(t))/t^2`.
fn rodrigues_coeffs(theta: f64) -> (f64, f64) {
    if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        let half = (0.5 * theta).sin();
        (theta.sin() / theta, 2.0 * half * half / (theta * theta))
    }
}

/// `(t - sin t)/t^3`.
fn coeff_c1(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// `(t^2 + 2 cos t - 2)/(2 t^4)`.
fn coeff_c2(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40_320.0 - t2 * t2 * t2 / 3_628_800.0
    } else {
        let t2 = theta * theta;
        (t2 + 2.0 * theta.cos() - 2.0) / (2.0 * t2 * t2)
    }
}

/// `(2t - 3 sin t + t cos t)/(2 t^5)`.
fn coeff_c3(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120_960.0 - t2 * t2 * t2 / 7_983_360.0
    } else {
        let t2 = theta * theta;
        (2.0 * theta - 3.0 * theta.sin() + theta * theta.cos()) / (2.0 * t2 * t2 * theta)
    }
}

/// `1/t^2 - (1 + cos t)/(2 t sin t)`.
fn coeff_jinv(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30_240.0 + t2 * t2 * t2 / 1_209_600.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    }
}

pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let (a, b) = rodrigues_coeffs(theta);
    let k = skew(phi);
    Matrix3::identity() + k * a + k * k * b
}

pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let w = unskew(r);
    let s = w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if PI - theta < LOG_PI_MARGIN {
        return Err(Error::IllConditionedLog { angle: theta });
    }
    if theta < 1e-4 {
        let t2 = theta * theta;
        return Ok(w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if theta < 3.0 {
        return Ok(w * (theta / s));
    }
    // Near pi the antisymmetric part is small; take the axis from the
    // symmetric part and the sign from the antisymmetric part.
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let (mut best, mut idx) = (sym[(0, 0)], 0);
    for i in 1..3 {
        if sym[(i, i)] > best {
            best = sym[(i, i)];
            idx = i;
        }
    }
    let mut axis = sym.column(idx).into_owned() / best.max(f64::MIN_POSITIVE).sqrt();
    axis.normalize_mut();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let (_, b) = rodrigues_coeffs(theta);
    let k = skew(phi);
    Matrix3::identity() + k * b + k * k * coeff_c1(theta)
}

pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let theta = phi.norm();
    if theta > 2.0 * PI - JAC_INV_MARGIN {
        return Err(Error::IllConditionedJacobian { angle: theta });
    }
    let k = skew(phi);
    Ok(Matrix3::identity() - k * 0.5 + k * k * coeff_jinv(theta))
}

/// The off-diagonal block of the SE(3) left Jacobian.
fn se3_q(rho: &Vector3<f64>, phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let p = skew(phi);
    let r = skew(rho);
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    r * 0.5
        + (pr + rp + prp) * coeff_c1(theta)
        + (p * pr + rp * p - prp * 3.0) * coeff_c2(theta)
        + (prp * p + p * prp) * coeff_c3(theta)
}

// --- SE(3) -----------------------------------------------------------------

/// Exponential map se(3) -> SE(3), evaluated in closed form.
pub fn exp_map(x: &Twist) -> Pose {
    let rho = linear(x);
    let phi = angular(x);
    Pose {
        rotation: so3_exp(&phi),
        translation: so3_left_jacobian(&phi) * rho,
    }
}

/// Logarithm SE(3) -> se(3). Fails when the rotation angle is within 1e-6 of pi.
pub fn log_map(t: &Pose) -> Result<Twist> {
    let phi = so3_log(&t.rotation)?;
    let rho = so3_left_jacobian_inv(&phi)? * t.translation;
    Ok(twist(rho, phi))
}

/// Left Jacobian of SE(3), `sum_n curlywedge(x)^n / (n+1)!`, in closed form.
pub fn left_jacobian(x: &Twist) -> Matrix6<f64> {
    let rho = linear(x);
    let phi = angular(x);
    let j = so3_left_jacobian(&phi);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&se3_q(&rho, &phi));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    m
}

/// Inverse of [`left_jacobian`]. Fails when the rotation angle approaches 2*pi.
pub fn left_jacobian_inv(x: &Twist) -> Result<Matrix6<f64>> {
    let rho = linear(x);
    let phi = angular(x);
    let jinv = so3_left_jacobian_inv(&phi)?;
    let q = se3_q(&rho, &phi);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&jinv);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-jinv * q * jinv));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&jinv);
    Ok(m)
}

/// Derivative of `left_jacobian(x) * y` with respect to `x`, for fixed `y`.
///
/// Uses the series `J(x) y = sum_n X^n y / (n+1)!` with `X = curlywedge(x)`,
/// differentiated term by term: `d(X^n y) = X d(X^(n-1) y) - (X^(n-1) y)^curly`.
pub fn left_jacobian_derivative(x: &Twist, y: &Twist) -> Matrix6<f64> {
    let big_x = curlywedge(x);
    let mut w = *y;
    let mut d = Matrix6::<f64>::zeros();
    let mut acc = Matrix6::<f64>::zeros();
    let mut coeff = 1.0;
    let scale = 1.0 + y.norm();
    for n in 1..200 {
        d = big_x * d - curlywedge(&w);
        w = big_x * w;
        coeff /= (n + 1) as f64;
        let term = d * coeff;
        acc += term;
        if n > 4 && term.norm() < 1e-18 * scale && w.norm() * coeff < 1e-18 * scale {
            break;
        }
    }
    acc
}

/// Derivative of `left_jacobian_inv(x) * v` with respect to `x`, for fixed `v`.
///
/// Differentiates `J(x) (J(x)^-1 v) = v` implicitly.
pub fn left_jacobian_inv_derivative(x: &Twist, v: &Twist) -> Result<Matrix6<f64>> {
    let jinv = left_jacobian_inv(x)?;
    let y = jinv * v;
    Ok(-jinv * left_jacobian_derivative(x, &y))
}

/// Local Markovian state on one node interval: the local pose `xi` relative to
/// the interval's start node and the transformed velocity bias `psi`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalState {
    pub xi: Twist,
    pub psi: Twist,
}

impl LocalState {
    pub fn new(xi: Twist, psi: Twist) -> Self {
        Self { xi, psi }
    }

    pub fn from_vector(g: &Vector12) -> Self {
        Self {
            xi: g.fixed_rows::<6>(0).into_owned(),
            psi: g.fixed_rows::<6>(6).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector12 {
        let mut g = Vector12::zeros();
        g.fixed_rows_mut::<6>(0).copy_from(&self.xi);
        g.fixed_rows_mut::<6>(6).copy_from(&self.psi);
        g
    }

    /// Local state of `(pose, bias)` relative to the reference pose `origin`.
    pub fn from_global(origin: &Pose, pose: &Pose, bias: &Twist) -> Result<Self> {
        let xi = log_map(&(*pose * origin.inverse()))?;
        let psi = left_jacobian_inv(&xi)? * bias;
        Ok(Self { xi, psi })
    }

    /// Maps back to a global pose and velocity bias. Fails when the local
    /// rotation angle reaches pi, where the chart stops being one-to-one.
    pub fn to_global(&self, origin: &Pose) -> Result<(Pose, Twist)> {
        let angle = angular(&self.xi).norm();
        if angle >= PI {
            return Err(Error::IntervalTooLong { angle });
        }
        let pose = (exp_map(&self.xi) * *origin).normalized();
        Ok((pose, left_jacobian(&self.xi) * self.psi))
    }
}
