//! Posterior (or prior) queries at arbitrary times inside a node interval.

use std::ops::AddAssign;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::factors::{JacobianMode, StateNode};
use crate::liegroup::{
    curlywedge, exp_map, left_jacobian, left_jacobian_derivative, left_jacobian_inv,
    left_jacobian_inv_derivative, log_map, LocalState, Matrix12, Pose, Twist,
};
use crate::prior::{IntervalBlocks, QueryBlocks};

/// Posterior state at a query time.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub time: f64,
    pub pose: Pose,
    /// Velocity bias at the query.
    pub bias: Twist,
    /// Full velocity `bias + v_in(tau)`, right-continuous at input knots.
    pub velocity: Twist,
    /// Left limit of the full velocity.
    pub velocity_left: Twist,
    /// Covariance of the left pose perturbation and additive bias perturbation.
    pub covariance: Option<Matrix12>,
    /// Set when the covariance ignored the cross-covariance between the nodes.
    pub covariance_approximate: bool,
}

/// Covariance blocks of two adjacent nodes in their own perturbation
/// coordinates. `cross` is `cov(x_k, x_{k+1})`; `None` means block-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCovariance {
    pub start: Matrix12,
    pub end: Matrix12,
    pub cross: Option<Matrix12>,
}

/// Local state of the end node in the interval's chart, with its derivatives
/// with respect to both nodes' perturbations.
#[derive(Clone, Debug)]
pub struct EndState {
    pub gamma: LocalState,
    pub d_start: Matrix12,
    pub d_end: Matrix12,
}

/// Builds `gamma_{k+1} = [ln(T_{k+1} T_k^-1); J^-1 bias_{k+1}]` and its
/// Jacobians. `FirstOrder` replaces the derivative of `J^-1 bias` by that of
/// `(I - xi^curly / 2) bias`.
pub fn end_state(start: &StateNode, end: &StateNode, mode: JacobianMode) -> Result<EndState> {
    let xi = log_map(&(end.pose * start.pose.inverse()))?;
    let jinv = left_jacobian_inv(&xi)?;
    let jinv_r = left_jacobian_inv(&(-xi))?;
    let psi = jinv * end.bias;
    let dpsi_dxi = match mode {
        JacobianMode::Exact => left_jacobian_inv_derivative(&xi, &end.bias)?,
        JacobianMode::FirstOrder => curlywedge(&end.bias) * 0.5,
    };
    let mut d_start = Matrix12::zeros();
    d_start.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-jinv_r));
    d_start
        .fixed_view_mut::<6, 6>(6, 0)
        .copy_from(&(-dpsi_dxi * jinv_r));
    let mut d_end = Matrix12::zeros();
    d_end.fixed_view_mut::<6, 6>(0, 0).copy_from(&jinv);
    d_end.fixed_view_mut::<6, 6>(6, 0).copy_from(&(dpsi_dxi * jinv));
    d_end.fixed_view_mut::<6, 6>(6, 6).copy_from(&jinv);
    Ok(EndState {
        gamma: LocalState::new(xi, psi),
        d_start,
        d_end,
    })
}

fn at_start(blocks: &IntervalBlocks, tau: f64) -> bool {
    tau <= blocks.start()
}

fn at_end(blocks: &IntervalBlocks, tau: f64) -> bool {
    tau >= blocks.end()
}

fn check_tau(blocks: &IntervalBlocks, tau: f64) -> Result<()> {
    let tol = 1e-9 * blocks.duration().max(1.0);
    if !(tau >= blocks.start() - tol && tau <= blocks.end() + tol) {
        return Err(Error::Domain {
            value: tau,
            lower: blocks.start(),
            upper: blocks.end(),
        });
    }
    Ok(())
}

fn weights(blocks: &IntervalBlocks, qb: &QueryBlocks) -> (Matrix12, Matrix12) {
    let psi = qb.q * qb.phi_to_end.transpose() * blocks.q_inv();
    let lambda = qb.phi_from_start - psi * blocks.phi();
    (lambda, psi)
}

/// Interpolation matrices `Lambda(tau)` and `Psi(tau)`.
pub fn lambda_psi(blocks: &IntervalBlocks, tau: f64) -> Result<(Matrix12, Matrix12)> {
    check_tau(blocks, tau)?;
    if at_start(blocks, tau) {
        return Ok((Matrix12::identity(), Matrix12::zeros()));
    }
    if at_end(blocks, tau) {
        return Ok((Matrix12::zeros(), Matrix12::identity()));
    }
    Ok(weights(blocks, &blocks.query(tau)?))
}

/// Interpolated state with the Jacobians of its perturbation coordinates with
/// respect to both bracketing nodes.
#[derive(Clone, Debug)]
pub struct InterpolatedState {
    pub pose: Pose,
    pub bias: Twist,
    pub local: LocalState,
    pub d_start: Matrix12,
    pub d_end: Matrix12,
    /// Maps local-state perturbations at the query onto its perturbation
    /// coordinates.
    pub local_to_global: Matrix12,
    /// `Q_tau - Q_tau Phi(t_{k+1}, tau)^T Q_k^-1 Phi(t_{k+1}, tau) Q_tau`.
    pub conditional_q: Matrix12,
}

fn local_to_global(local: &LocalState) -> Matrix12 {
    let j = left_jacobian(&local.xi);
    let mut m = Matrix12::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&j);
    m.fixed_view_mut::<6, 6>(6, 0)
        .copy_from(&left_jacobian_derivative(&local.xi, &local.psi));
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(&j);
    m
}

/// Evaluates the posterior mean at `tau` from the bracketing nodes.
pub fn interpolate_state(
    start: &StateNode,
    end: &StateNode,
    blocks: &IntervalBlocks,
    tau: f64,
) -> Result<InterpolatedState> {
    check_tau(blocks, tau)?;
    if at_start(blocks, tau) {
        let local = LocalState::new(Twist::zeros(), start.bias);
        return Ok(InterpolatedState {
            pose: start.pose,
            bias: start.bias,
            local,
            d_start: Matrix12::identity(),
            d_end: Matrix12::zeros(),
            local_to_global: Matrix12::identity(),
            conditional_q: Matrix12::zeros(),
        });
    }
    let es = end_state(start, end, JacobianMode::Exact)?;
    if at_end(blocks, tau) {
        return Ok(InterpolatedState {
            pose: end.pose,
            bias: end.bias,
            local: es.gamma,
            d_start: Matrix12::zeros(),
            d_end: Matrix12::identity(),
            local_to_global: local_to_global(&es.gamma),
            conditional_q: Matrix12::zeros(),
        });
    }
    let qb = blocks.query(tau)?;
    let (lambda, psi_w) = weights(blocks, &qb);
    let g_start = LocalState::new(Twist::zeros(), start.bias).to_vector();
    let g_end = es.gamma.to_vector();
    let gamma = qb.integral + lambda * g_start + psi_w * (g_end - blocks.input_integral());
    let local = LocalState::from_vector(&gamma);
    let (pose, bias) = local.to_global(&start.pose)?;

    let mut e_start = Matrix12::zeros();
    e_start
        .fixed_view_mut::<6, 6>(6, 6)
        .copy_from(&nalgebra::Matrix6::identity());
    let m = local_to_global(&local);
    let mut d_start = m * (lambda * e_start + psi_w * es.d_start);
    let ad = exp_map(&local.xi).adjoint();
    d_start.fixed_view_mut::<6, 6>(0, 0).add_assign(&ad);
    let d_end = m * psi_w * es.d_end;
    let conditional_q =
        qb.q - qb.q * qb.phi_to_end.transpose() * blocks.q_inv() * qb.phi_to_end * qb.q;
    let conditional_q = (conditional_q + conditional_q.transpose()) * 0.5;
    Ok(InterpolatedState {
        pose,
        bias,
        local,
        d_start,
        d_end,
        local_to_global: m,
        conditional_q,
    })
}

/// Posterior mean at `tau`, with the full velocity restored from the inputs.
pub fn interpolate_mean(
    start: &StateNode,
    end: &StateNode,
    blocks: &IntervalBlocks,
    tau: f64,
) -> Result<QueryResult> {
    let st = interpolate_state(start, end, blocks, tau)?;
    let (v_in, _) = blocks.inputs_at(tau)?;
    let (v_left, _) = blocks.inputs_left_at(tau)?;
    Ok(QueryResult {
        time: tau,
        pose: st.pose,
        bias: st.bias,
        velocity: st.bias + v_in,
        velocity_left: st.bias + v_left,
        covariance: None,
        covariance_approximate: false,
    })
}

fn check_psd(m: &Matrix12, what: &str) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if asym > 1e-8 * scale {
        return Err(Error::Numerical(format!("{what} is not symmetric")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let min = SymmetricEigen::new(sym).eigenvalues.min();
    if min < -1e-8 * sym.trace().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "{what} is not positive semi-definite (eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// Posterior covariance at `tau` in the query's perturbation coordinates.
pub fn interpolate_covariance(
    start: &StateNode,
    end: &StateNode,
    cov: &JointCovariance,
    blocks: &IntervalBlocks,
    tau: f64,
) -> Result<Matrix12> {
    check_psd(&cov.start, "start-node covariance")?;
    check_psd(&cov.end, "end-node covariance")?;
    let st = interpolate_state(start, end, blocks, tau)?;
    Ok(covariance_from_state(&st, cov))
}

pub(crate) fn covariance_from_state(st: &InterpolatedState, cov: &JointCovariance) -> Matrix12 {
    let mut p = st.d_start * cov.start * st.d_start.transpose()
        + st.d_end * cov.end * st.d_end.transpose()
        + st.local_to_global * st.conditional_q * st.local_to_global.transpose();
    if let Some(cross) = &cov.cross {
        let c = st.d_start * cross * st.d_end.transpose();
        p += c + c.transpose();
    }
    (p + p.transpose()) * 0.5
}

/// Posterior covariance of the local state `gamma(tau)` in the interval's chart.
pub fn interpolate_covariance_local(
    start: &StateNode,
    end: &StateNode,
    cov: &JointCovariance,
    blocks: &IntervalBlocks,
    tau: f64,
) -> Result<Matrix12> {
    check_tau(blocks, tau)?;
    let es = end_state(start, end, JacobianMode::Exact)?;
    let (lambda, psi_w) = lambda_psi(blocks, tau)?;
    let mut e_start = Matrix12::zeros();
    e_start
        .fixed_view_mut::<6, 6>(6, 6)
        .copy_from(&nalgebra::Matrix6::identity());
    let a = lambda * e_start + psi_w * es.d_start;
    let b = psi_w * es.d_end;
    let qb = blocks.query(tau)?;
    let cond = qb.q - qb.q * qb.phi_to_end.transpose() * blocks.q_inv() * qb.phi_to_end * qb.q;
    let mut p = a * cov.start * a.transpose() + b * cov.end * b.transpose() + cond;
    if let Some(cross) = &cov.cross {
        let c = a * cross * b.transpose();
        p += c + c.transpose();
    }
    Ok((p + p.transpose()) * 0.5)
}
