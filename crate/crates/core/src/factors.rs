//! Error terms with analytic Jacobians for the motion prior and for the
//! measurement models.
//!
//! Every Jacobian is taken with respect to a node's 12 perturbation
//! coordinates: a left pose perturbation `T <- exp(delta^) T` followed by an
//! additive bias perturbation.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::interpolation::{end_state, interpolate_state};
use crate::liegroup::{left_jacobian_inv, log_map, Matrix12, Pose, Twist};
use crate::prior::IntervalBlocks;

/// Information weight used for soft planar locking.
pub const PLANAR_LOCK_INFORMATION: f64 = 1e8;

/// A discrete estimation state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateNode {
    pub time: f64,
    pub pose: Pose,
    /// Velocity bias, the part of the velocity not explained by the inputs.
    pub bias: Twist,
}

impl StateNode {
    pub fn new(time: f64, pose: Pose, bias: Twist) -> Self {
        Self { time, pose, bias }
    }

    /// Applies a 12-vector perturbation `[delta; d_bias]`.
    pub fn retract(&self, dx: &[f64]) -> Self {
        let delta = Twist::from_column_slice(&dx[0..6]);
        let db = Twist::from_column_slice(&dx[6..12]);
        Self {
            time: self.time,
            pose: self.pose.perturbed(&delta),
            bias: self.bias + db,
        }
    }
}

/// How the prior factor differentiates the transformed end-node bias.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianMode {
    /// Exact derivative of `J(xi)^-1 bias`.
    #[default]
    Exact,
    /// Derivative of the small-angle form `(I - xi^curly / 2) bias`.
    FirstOrder,
}

/// A linearized factor.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorEval {
    pub error: DVector<f64>,
    /// `(node index, d error / d perturbation)` with 12 columns per node.
    pub jacobians: Vec<(usize, DMatrix<f64>)>,
    pub information: DMatrix<f64>,
}

impl FactorEval {
    /// `0.5 e^T W e`.
    pub fn cost(&self) -> f64 {
        0.5 * self.error.dot(&(&self.information * &self.error))
    }
}

fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) || (m - m.transpose()).norm() > 1e-9 * m.norm().max(1.0) {
        return Err(Error::Hyperparameter(format!("{what} is not symmetric")));
    }
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::Hyperparameter(format!(
            "{what} is not positive definite (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

fn inverse_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_pd(m, what)?;
    let inv = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Hyperparameter(format!("{what} is not positive definite")))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

fn to_dmatrix<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Motion-prior factor between two adjacent nodes, weighted by `Q_k^-1`.
pub fn prior_factor_error(
    start: &StateNode,
    end: &StateNode,
    blocks: &IntervalBlocks,
    mode: JacobianMode,
) -> Result<FactorEval> {
    let tol = 1e-9 * blocks.duration().max(1.0);
    if (start.time - blocks.start()).abs() > tol || (end.time - blocks.end()).abs() > tol {
        return Err(Error::Wiring(format!(
            "nodes at [{}, {}] do not match interval [{}, {}]",
            start.time,
            end.time,
            blocks.start(),
            blocks.end()
        )));
    }
    let es = end_state(start, end, mode)?;
    let phi = blocks.phi();
    let mut g_start = crate::liegroup::Vector12::zeros();
    g_start.fixed_rows_mut::<6>(6).copy_from(&start.bias);
    let error = es.gamma.to_vector() - phi * g_start - blocks.input_integral();

    let mut j_start = es.d_start;
    let phi_bias = phi.fixed_view::<12, 6>(0, 6).into_owned();
    j_start.fixed_view_mut::<12, 6>(0, 6).copy_from(&(-phi_bias));
    Ok(FactorEval {
        error: DVector::from_column_slice(error.as_slice()),
        jacobians: vec![(0, to_dmatrix(&j_start)), (1, to_dmatrix(&es.d_end))],
        information: to_dmatrix(blocks.q_inv()),
    })
}

/// A state at which a measurement is evaluated, together with the velocity
/// input active there.
#[derive(Clone, Copy, Debug)]
pub struct MeasuredState {
    pub pose: Pose,
    pub bias: Twist,
    pub v_in: Twist,
}

/// Measurement models attachable to a node or to an interpolated time.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Measurement {
    /// Distance to a known landmark (world coordinates).
    Range {
        landmark: Vector3<f64>,
        range: f64,
        variance: f64,
    },
    /// Full pose, residual `ln(measured T^-1)`.
    Pose {
        measured: Pose,
        covariance: Matrix6<f64>,
    },
    /// World position of the body origin.
    Position {
        measured: Vector3<f64>,
        covariance: Matrix3<f64>,
    },
    /// Full velocity `bias + v_in`, restricted to the masked components.
    Velocity {
        measured: Twist,
        covariance: Matrix6<f64>,
        mask: [bool; 6],
    },
    /// Pins the out-of-plane pose and velocity components (height, tilt,
    /// vertical and roll/pitch rates) to zero. With `lateral`, the sideways
    /// velocity bias is pinned as well, as for a non-holonomic vehicle.
    PlanarLock { information: f64, lateral: bool },
    /// Gaussian prior on a whole node.
    StatePrior {
        pose: Pose,
        bias: Twist,
        covariance: Matrix12,
    },
}

/// Error, Jacobian with respect to the state's 12 perturbation coordinates, and
/// information.
pub type Linearization = (DVector<f64>, DMatrix<f64>, DMatrix<f64>);

impl Measurement {
    pub fn dimension(&self) -> usize {
        match self {
            Measurement::Range { .. } => 1,
            Measurement::Pose { .. } => 6,
            Measurement::Position { .. } => 3,
            Measurement::Velocity { mask, .. } => mask.iter().filter(|m| **m).count(),
            Measurement::PlanarLock { lateral, .. } => 6 + usize::from(*lateral),
            Measurement::StatePrior { .. } => 12,
        }
    }

    pub fn linearize(&self, state: &MeasuredState) -> Result<Linearization> {
        match self {
            Measurement::Range {
                landmark,
                range,
                variance,
            } => range_linearization(state, landmark, *range, *variance),
            Measurement::Pose {
                measured,
                covariance,
            } => pose_linearization(state, measured, covariance),
            Measurement::Position {
                measured,
                covariance,
            } => position_linearization(state, measured, covariance),
            Measurement::Velocity {
                measured,
                covariance,
                mask,
            } => velocity_linearization(state, measured, covariance, mask),
            Measurement::PlanarLock {
                information,
                lateral,
            } => planar_linearization(state, *information, *lateral),
            Measurement::StatePrior {
                pose,
                bias,
                covariance,
            } => state_prior_linearization(state, pose, bias, covariance),
        }
    }
}

fn range_linearization(
    state: &MeasuredState,
    landmark: &Vector3<f64>,
    range: f64,
    variance: f64,
) -> Result<Linearization> {
    if !(variance > 0.0) {
        return Err(Error::Hyperparameter(format!(
            "range variance must be positive, got {variance}"
        )));
    }
    let p = state.pose.world_position();
    let diff = landmark - p;
    let dist = diff.norm();
    if dist < 1e-9 {
        return Err(Error::SingularGeometry(
            "robot coincides with the landmark".into(),
        ));
    }
    let dir = diff / dist;
    // d p / d delta = [-R^T, 0]
    let row = -(dir.transpose() * state.pose.rotation().transpose());
    let mut jac = DMatrix::zeros(1, 12);
    for c in 0..3 {
        jac[(0, c)] = row[c];
    }
    Ok((
        DVector::from_element(1, range - dist),
        jac,
        DMatrix::from_element(1, 1, 1.0 / variance),
    ))
}

fn pose_linearization(
    state: &MeasuredState,
    measured: &Pose,
    covariance: &Matrix6<f64>,
) -> Result<Linearization> {
    let info = inverse_pd(&to_dmatrix(covariance), "pose covariance")?;
    let e = log_map(&(*measured * state.pose.inverse()))?;
    let jr_inv = left_jacobian_inv(&(-e))?;
    let mut jac = DMatrix::zeros(6, 12);
    jac.view_mut((0, 0), (6, 6)).copy_from(&(-jr_inv));
    Ok((DVector::from_column_slice(e.as_slice()), jac, info))
}

fn position_linearization(
    state: &MeasuredState,
    measured: &Vector3<f64>,
    covariance: &Matrix3<f64>,
) -> Result<Linearization> {
    let info = inverse_pd(&to_dmatrix(covariance), "position covariance")?;
    let e = measured - state.pose.world_position();
    let mut jac = DMatrix::zeros(3, 12);
    jac.view_mut((0, 0), (3, 3))
        .copy_from(&state.pose.rotation().transpose());
    Ok((DVector::from_column_slice(e.as_slice()), jac, info))
}

fn velocity_linearization(
    state: &MeasuredState,
    measured: &Twist,
    covariance: &Matrix6<f64>,
    mask: &[bool; 6],
) -> Result<Linearization> {
    let idx: Vec<usize> = (0..6).filter(|i| mask[*i]).collect();
    if idx.is_empty() {
        return Err(Error::DegenerateFactor("velocity mask selects nothing".into()));
    }
    let n = idx.len();
    let cov = DMatrix::from_fn(n, n, |r, c| covariance[(idx[r], idx[c])]);
    let info = inverse_pd(&cov, "velocity covariance")?;
    let full = measured - (state.bias + state.v_in);
    let e = DVector::from_iterator(n, idx.iter().map(|i| full[*i]));
    let mut jac = DMatrix::zeros(n, 12);
    for (r, i) in idx.iter().enumerate() {
        jac[(r, 6 + i)] = -1.0;
    }
    Ok((e, jac, info))
}

fn planar_linearization(
    state: &MeasuredState,
    information: f64,
    lateral: bool,
) -> Result<Linearization> {
    if !(information > 0.0) {
        return Err(Error::Hyperparameter(format!(
            "planar lock information must be positive, got {information}"
        )));
    }
    let rt = state.pose.rotation().transpose();
    let p = state.pose.world_position();
    let up = rt * Vector3::z();
    let mut e = vec![p.z, up.x, up.y, state.bias[2], state.bias[3], state.bias[4]];
    if lateral {
        e.push(state.bias[1]);
    }
    let n = e.len();
    let e = DVector::from_vec(e);
    let mut jac = DMatrix::zeros(n, 12);
    // d p / d rho = -R^T
    for c in 0..3 {
        jac[(0, c)] = -rt[(2, c)];
    }
    // d (R^T e_z) / d phi = R^T [e_z]x
    let d_up = rt * crate::liegroup::skew(&Vector3::z());
    for c in 0..3 {
        jac[(1, 3 + c)] = d_up[(0, c)];
        jac[(2, 3 + c)] = d_up[(1, c)];
    }
    jac[(3, 8)] = 1.0;
    jac[(4, 9)] = 1.0;
    jac[(5, 10)] = 1.0;
    if lateral {
        jac[(6, 7)] = 1.0;
    }
    Ok((e, jac, DMatrix::identity(n, n) * information))
}

fn state_prior_linearization(
    state: &MeasuredState,
    pose: &Pose,
    bias: &Twist,
    covariance: &Matrix12,
) -> Result<Linearization> {
    let info = inverse_pd(&to_dmatrix(covariance), "state prior covariance")?;
    let ep = log_map(&(*pose * state.pose.inverse()))?;
    let eb = bias - state.bias;
    let jr_inv = left_jacobian_inv(&(-ep))?;
    let mut e = DVector::zeros(12);
    e.rows_mut(0, 6).copy_from(&ep);
    e.rows_mut(6, 6).copy_from(&eb);
    let mut jac = DMatrix::zeros(12, 12);
    jac.view_mut((0, 0), (6, 6)).copy_from(&(-jr_inv));
    jac.view_mut((6, 6), (6, 6))
        .copy_from(&(-DMatrix::<f64>::identity(6, 6)));
    Ok((e, jac, info))
}

fn single(node: usize, lin: Linearization) -> FactorEval {
    let (error, jac, information) = lin;
    FactorEval {
        error,
        jacobians: vec![(node, jac)],
        information,
    }
}

pub fn range_factor_error(
    node: &StateNode,
    landmark: &Vector3<f64>,
    measured_range: f64,
    variance: f64,
) -> Result<FactorEval> {
    let st = MeasuredState {
        pose: node.pose,
        bias: node.bias,
        v_in: Twist::zeros(),
    };
    Ok(single(0, range_linearization(&st, landmark, measured_range, variance)?))
}

pub fn pose_factor_error(
    node: &StateNode,
    measured: &Pose,
    covariance: &Matrix6<f64>,
) -> Result<FactorEval> {
    let st = MeasuredState {
        pose: node.pose,
        bias: node.bias,
        v_in: Twist::zeros(),
    };
    Ok(single(0, pose_linearization(&st, measured, covariance)?))
}

pub fn position_factor_error(
    node: &StateNode,
    measured: &Vector3<f64>,
    covariance: &Matrix3<f64>,
) -> Result<FactorEval> {
    let st = MeasuredState {
        pose: node.pose,
        bias: node.bias,
        v_in: Twist::zeros(),
    };
    Ok(single(0, position_linearization(&st, measured, covariance)?))
}

/// Velocity factor; `v_in` is the input active at the node (zero for a
/// constant-velocity prior).
pub fn velocity_factor_error(
    node: &StateNode,
    v_in: &Twist,
    measured: &Twist,
    covariance: &Matrix6<f64>,
    mask: &[bool; 6],
) -> Result<FactorEval> {
    let st = MeasuredState {
        pose: node.pose,
        bias: node.bias,
        v_in: *v_in,
    };
    Ok(single(0, velocity_linearization(&st, measured, covariance, mask)?))
}

/// Evaluates `inner` at the interpolated state at `tau` and chain-rules its
/// Jacobian onto both bracketing nodes (indices 0 and 1).
pub fn interpolated_factor(
    start: &StateNode,
    end: &StateNode,
    blocks: &IntervalBlocks,
    tau: f64,
    inner: &Measurement,
) -> Result<FactorEval> {
    let st = interpolate_state(start, end, blocks, tau)?;
    let (v_in, _) = blocks.inputs_at(tau)?;
    let ms = MeasuredState {
        pose: st.pose,
        bias: st.bias,
        v_in,
    };
    let (error, jac, information) = inner.linearize(&ms)?;
    let j_start = &jac * to_dmatrix(&st.d_start);
    let j_end = &jac * to_dmatrix(&st.d_end);
    Ok(FactorEval {
        error,
        jacobians: vec![(0, j_start), (1, j_end)],
        information,
    })
}
