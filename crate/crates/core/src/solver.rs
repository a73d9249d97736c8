//! MAP batch estimation over a chain of nodes: damped Gauss-Newton on the
//! block-tridiagonal normal equations, with marginal covariance recovery.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, U12};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factors::{
    prior_factor_error, FactorEval, JacobianMode, MeasuredState, Measurement, StateNode,
};
use crate::inputs::InputProfile;
use crate::interpolation::{covariance_from_state, interpolate_state, JointCovariance, QueryResult};
use crate::liegroup::{Matrix12, Twist, Vector12};
use crate::prior::{IntervalBlocks, PriorHyper};

/// Iteration control for [`solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub relative_cost_tolerance: f64,
    pub step_norm_tolerance: f64,
    pub initial_damping: f64,
    pub damping_growth: f64,
    /// Damping beyond which a failing step ends the solve unconverged.
    pub max_damping: f64,
    pub jacobian_mode: JacobianMode,
    pub compute_covariance: bool,
    /// Linearize factors on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_cost_tolerance: 1e-8,
            step_norm_tolerance: 1e-10,
            initial_damping: 0.0,
            damping_growth: 10.0,
            max_damping: 1e12,
            jacobian_mode: JacobianMode::Exact,
            compute_covariance: true,
            parallel: true,
        }
    }
}

/// Where a measurement is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Attachment {
    Node(usize),
    /// At `time` inside interval `interval` (between nodes `interval` and
    /// `interval + 1`), through the interpolation scheme.
    Interpolated { interval: usize, time: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFactor {
    pub attachment: Attachment,
    pub measurement: Measurement,
}

impl MeasurementFactor {
    pub fn at_node(node: usize, measurement: Measurement) -> Self {
        Self {
            attachment: Attachment::Node(node),
            measurement,
        }
    }

    pub fn at_time(interval: usize, time: f64, measurement: Measurement) -> Self {
        Self {
            attachment: Attachment::Interpolated { interval, time },
            measurement,
        }
    }
}

/// A batch estimation problem. Node `k` and node `k + 1` are joined by the
/// prior factor built from `intervals[k]`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub nodes: Vec<StateNode>,
    pub intervals: Arc<Vec<IntervalBlocks>>,
    pub measurements: Vec<MeasurementFactor>,
    pub settings: SolverSettings,
    /// Which components of the first node are held at their initial value.
    pub anchor: Anchor,
}

/// Components of the first node excluded from the optimization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Anchor {
    #[default]
    Free,
    /// Pose and bias.
    Node,
    /// Pose only; the bias stays free.
    Pose,
}

impl Anchor {
    fn dims(self) -> usize {
        match self {
            Anchor::Free => 0,
            Anchor::Node => 12,
            Anchor::Pose => 6,
        }
    }
}

/// One [`IntervalBlocks`] per adjacent node pair, computed in parallel.
pub fn precompute_intervals(
    times: &[f64],
    profiles: &[InputProfile],
    hyper: &PriorHyper,
) -> Result<Vec<IntervalBlocks>> {
    if times.len() < 2 {
        return Err(Error::Wiring(format!(
            "need at least 2 nodes, got {}",
            times.len()
        )));
    }
    if profiles.len() != times.len() - 1 {
        return Err(Error::Wiring(format!(
            "{} nodes need {} input profiles, got {}",
            times.len(),
            times.len() - 1,
            profiles.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Wiring("node times must be strictly increasing".into()));
    }
    (0..profiles.len())
        .into_par_iter()
        .map(|k| IntervalBlocks::new(times[k], times[k + 1], profiles[k].clone(), hyper.clone()))
        .collect()
}

impl Problem {
    /// Builds a problem from an initial guess and one input profile per
    /// interval.
    pub fn new(nodes: Vec<StateNode>, profiles: &[InputProfile], hyper: &PriorHyper) -> Result<Self> {
        let times: Vec<f64> = nodes.iter().map(|n| n.time).collect();
        let intervals = precompute_intervals(&times, profiles, hyper)?;
        Self::with_intervals(nodes, intervals)
    }

    pub fn with_intervals(nodes: Vec<StateNode>, intervals: Vec<IntervalBlocks>) -> Result<Self> {
        let p = Self {
            nodes,
            intervals: Arc::new(intervals),
            measurements: Vec::new(),
            settings: SolverSettings::default(),
            anchor: Anchor::Free,
        };
        p.check_wiring()?;
        Ok(p)
    }

    pub fn add(&mut self, factor: MeasurementFactor) {
        self.measurements.push(factor);
    }

    fn check_wiring(&self) -> Result<()> {
        let k = self.nodes.len();
        if k < 2 {
            return Err(Error::Wiring(format!("need at least 2 nodes, got {k}")));
        }
        if self.intervals.len() != k - 1 {
            return Err(Error::Wiring(format!(
                "{k} nodes need {} prior factors, got {}",
                k - 1,
                self.intervals.len()
            )));
        }
        for (i, b) in self.intervals.iter().enumerate() {
            let tol = 1e-9 * b.duration().max(1.0);
            if (b.start() - self.nodes[i].time).abs() > tol
                || (b.end() - self.nodes[i + 1].time).abs() > tol
            {
                return Err(Error::Wiring(format!(
                    "interval {i} spans [{}, {}] but its nodes sit at {} and {}",
                    b.start(),
                    b.end(),
                    self.nodes[i].time,
                    self.nodes[i + 1].time
                )));
            }
        }
        for m in &self.measurements {
            match m.attachment {
                Attachment::Node(i) if i >= k => {
                    return Err(Error::Wiring(format!("measurement on missing node {i}")))
                }
                Attachment::Interpolated { interval, time } => {
                    let b = self.intervals.get(interval).ok_or_else(|| {
                        Error::Wiring(format!("measurement on missing interval {interval}"))
                    })?;
                    if time < b.start() - 1e-9 || time > b.end() + 1e-9 {
                        return Err(Error::Domain {
                            value: time,
                            lower: b.start(),
                            upper: b.end(),
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Node pairs `(i, j)`, `i <= j`, coupled by at least one factor.
    pub fn coupled_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = (0..self.intervals.len()).map(|k| (k, k + 1)).collect();
        for m in &self.measurements {
            match m.attachment {
                Attachment::Node(i) => pairs.push((i, i)),
                Attachment::Interpolated { interval, .. } => pairs.push((interval, interval + 1)),
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Velocity input active at node `i` (right-continuous).
    pub fn node_input(&self, i: usize) -> Result<Twist> {
        let (b, t) = if i + 1 < self.nodes.len() {
            (&self.intervals[i], self.nodes[i].time)
        } else {
            (&self.intervals[i - 1], self.nodes[i].time)
        };
        Ok(b.inputs_at(t)?.0)
    }
}

/// Posterior of a [`solve`] run.
#[derive(Clone, Debug)]
pub struct Solution {
    pub nodes: Vec<StateNode>,
    /// Marginal covariance of each node's perturbation coordinates.
    pub node_covariances: Vec<Matrix12>,
    /// `cov(x_k, x_{k+1})` for each interval.
    pub cross_covariances: Vec<Matrix12>,
    pub cost_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub intervals: Arc<Vec<IntervalBlocks>>,
}

impl Solution {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().unwrap_or(&f64::NAN)
    }

    /// Index of the interval containing `t`; node times belong to the interval
    /// they start, except the last node.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        let first = self.nodes[0].time;
        let last = self.nodes[self.nodes.len() - 1].time;
        if !(t >= first - 1e-9 && t <= last + 1e-9) {
            return Err(Error::Domain {
                value: t,
                lower: first,
                upper: last,
            });
        }
        let idx = self.nodes.partition_point(|n| n.time <= t);
        Ok(idx.saturating_sub(1).min(self.intervals.len() - 1))
    }

    /// Posterior mean (and covariance, when available) at `t`.
    pub fn query(&self, t: f64) -> Result<QueryResult> {
        let k = self.interval_of(t)?;
        let blocks = &self.intervals[k];
        let (a, b) = (&self.nodes[k], &self.nodes[k + 1]);
        let st = interpolate_state(a, b, blocks, t)?;
        let (v_in, _) = blocks.inputs_at(t)?;
        let (v_left, _) = if k > 0 && (t - a.time).abs() < 1e-12 {
            self.intervals[k - 1].inputs_left_at(t)?
        } else {
            blocks.inputs_left_at(t)?
        };
        let covariance = if self.node_covariances.len() == self.nodes.len() {
            let joint = JointCovariance {
                start: self.node_covariances[k],
                end: self.node_covariances[k + 1],
                cross: self.cross_covariances.get(k).copied(),
            };
            Some(covariance_from_state(&st, &joint))
        } else {
            None
        };
        Ok(QueryResult {
            time: t,
            pose: st.pose,
            bias: st.bias,
            velocity: st.bias + v_in,
            velocity_left: st.bias + v_left,
            covariance,
            covariance_approximate: false,
        })
    }

    /// Queries many times in parallel.
    pub fn query_many(&self, times: &[f64]) -> Result<Vec<QueryResult>> {
        times.par_iter().map(|t| self.query(*t)).collect()
    }
}

/// Block-tridiagonal normal equations: `diag[i]`, `upper[i]` couples node `i`
/// with `i + 1`.
struct Normal {
    diag: Vec<Matrix12>,
    upper: Vec<Matrix12>,
    rhs: Vec<Vector12>,
}

struct Linearized {
    factors: Vec<(Vec<usize>, FactorEval)>,
    cost: f64,
}

fn linearize(problem: &Problem, nodes: &[StateNode]) -> Result<Linearized> {
    let mode = problem.settings.jacobian_mode;
    let n_prior = problem.intervals.len();
    let eval = |idx: usize| -> Result<(Vec<usize>, FactorEval)> {
        if idx < n_prior {
            let f = prior_factor_error(&nodes[idx], &nodes[idx + 1], &problem.intervals[idx], mode)?;
            return Ok((vec![idx, idx + 1], f));
        }
        let m = &problem.measurements[idx - n_prior];
        match m.attachment {
            Attachment::Node(i) => {
                let v_in = if matches!(m.measurement, Measurement::Velocity { .. }) {
                    problem.node_input(i)?
                } else {
                    Twist::zeros()
                };
                let st = MeasuredState {
                    pose: nodes[i].pose,
                    bias: nodes[i].bias,
                    v_in,
                };
                let (error, jac, information) = m.measurement.linearize(&st)?;
                Ok((
                    vec![i],
                    FactorEval {
                        error,
                        jacobians: vec![(0, jac)],
                        information,
                    },
                ))
            }
            Attachment::Interpolated { interval, time } => {
                let f = crate::factors::interpolated_factor(
                    &nodes[interval],
                    &nodes[interval + 1],
                    &problem.intervals[interval],
                    time,
                    &m.measurement,
                )?;
                Ok((vec![interval, interval + 1], f))
            }
        }
    };
    let total = n_prior + problem.measurements.len();
    let factors: Result<Vec<_>> = if problem.settings.parallel {
        (0..total).into_par_iter().map(eval).collect()
    } else {
        (0..total).map(eval).collect()
    };
    let factors = factors?;
    let cost = factors.iter().map(|(_, f)| f.cost()).sum();
    Ok(Linearized { factors, cost })
}

fn block12(m: &DMatrix<f64>, r: usize, c: usize) -> Matrix12 {
    m.fixed_view::<12, 12>(r, c).into_owned()
}

fn assemble(lin: &Linearized, k: usize, anchor: Anchor) -> Normal {
    let mut normal = Normal {
        diag: vec![Matrix12::zeros(); k],
        upper: vec![Matrix12::zeros(); k.saturating_sub(1)],
        rhs: vec![Vector12::zeros(); k],
    };
    for (nodes, f) in &lin.factors {
        let dim = f.error.len();
        let width = 12 * nodes.len();
        let mut jac = DMatrix::zeros(dim, width);
        for (slot, j) in &f.jacobians {
            jac.view_mut((0, 12 * slot), (dim, 12)).copy_from(j);
        }
        let jt_w = jac.transpose() * &f.information;
        let h = &jt_w * &jac;
        let g = -(&jt_w * &f.error);
        for (a, &na) in nodes.iter().enumerate() {
            normal.diag[na] += block12(&h, 12 * a, 12 * a);
            normal.rhs[na] += g.fixed_rows::<12>(12 * a);
            for (b, &nb) in nodes.iter().enumerate() {
                if nb == na + 1 {
                    normal.upper[na] += block12(&h, 12 * a, 12 * b);
                }
            }
        }
    }
    let n = anchor.dims();
    if n > 0 && k > 0 {
        let d = &mut normal.diag[0];
        d.view_mut((0, 0), (n, 12)).fill(0.0);
        d.view_mut((0, 0), (12, n)).fill(0.0);
        for j in 0..n {
            d[(j, j)] = 1.0;
            normal.rhs[0][j] = 0.0;
        }
        if k > 1 {
            normal.upper[0].view_mut((0, 0), (n, 12)).fill(0.0);
        }
    }
    normal
}

/// Block LDL^T factorization of the tridiagonal system.
struct Factorization {
    chol: Vec<Cholesky<f64, U12>>,
}

fn factorize(diag: &[Matrix12], upper: &[Matrix12]) -> Result<Factorization> {
    let mut chol: Vec<Cholesky<f64, U12>> = Vec::with_capacity(diag.len());
    for i in 0..diag.len() {
        let mut s = diag[i];
        if i > 0 {
            let u = &upper[i - 1];
            s -= u.transpose() * chol[i - 1].solve(u);
        }
        let s = (s + s.transpose()) * 0.5;
        let c = Cholesky::new(s).ok_or(Error::GaugeFreedom { node: i })?;
        chol.push(c);
    }
    Ok(Factorization { chol })
}

fn back_substitute(f: &Factorization, upper: &[Matrix12], rhs: &[Vector12]) -> Vec<Vector12> {
    let n = rhs.len();
    let mut y = rhs.to_vec();
    for i in 1..n {
        let prev = f.chol[i - 1].solve(&y[i - 1]);
        y[i] -= upper[i - 1].transpose() * prev;
    }
    let mut x = vec![Vector12::zeros(); n];
    x[n - 1] = f.chol[n - 1].solve(&y[n - 1]);
    for i in (0..n - 1).rev() {
        x[i] = f.chol[i].solve(&(y[i] - upper[i] * x[i + 1]));
    }
    x
}

/// Diagonal and first off-diagonal blocks of the inverse.
fn marginal_covariances(f: &Factorization, upper: &[Matrix12]) -> (Vec<Matrix12>, Vec<Matrix12>) {
    let n = f.chol.len();
    let mut diag = vec![Matrix12::zeros(); n];
    let mut cross = vec![Matrix12::zeros(); n.saturating_sub(1)];
    diag[n - 1] = f.chol[n - 1].inverse();
    for i in (0..n - 1).rev() {
        let s_inv = f.chol[i].inverse();
        let k = s_inv * upper[i];
        cross[i] = -k * diag[i + 1];
        let d = s_inv + k * diag[i + 1] * k.transpose();
        diag[i] = (d + d.transpose()) * 0.5;
    }
    (diag, cross)
}

fn retract_all(nodes: &[StateNode], dx: &[Vector12], anchor: Anchor) -> Vec<StateNode> {
    nodes
        .iter()
        .zip(dx)
        .enumerate()
        .map(|(i, (n, d))| {
            if i > 0 {
                return n.retract(d.as_slice());
            }
            match anchor {
                Anchor::Free => n.retract(d.as_slice()),
                Anchor::Node => *n,
                Anchor::Pose => StateNode {
                    bias: n.bias + d.fixed_rows::<6>(6),
                    ..*n
                },
            }
        })
        .collect()
}

/// Solves the MAP problem. A problem without any measurement anchors its
/// whole first node.
pub fn solve(problem: &Problem) -> Result<Solution> {
    problem.check_wiring()?;
    let s = &problem.settings;
    let k = problem.nodes.len();
    let anchor = if problem.measurements.is_empty() {
        Anchor::Node
    } else {
        problem.anchor
    };

    let mut nodes = problem.nodes.clone();
    let mut lin = linearize(problem, &nodes)?;
    let mut cost_history = vec![lin.cost];
    let mut damping = s.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut normal = assemble(&lin, k, anchor);

    while iterations < s.max_iterations {
        iterations += 1;
        let mut diag = normal.diag.clone();
        if damping > 0.0 {
            for d in diag.iter_mut() {
                for j in 0..12 {
                    d[(j, j)] += damping * d[(j, j)].max(1e-12);
                }
            }
        }
        let fac = match factorize(&diag, &normal.upper) {
            Ok(f) => f,
            Err(e) if damping == 0.0 => return Err(e),
            Err(_) => {
                damping *= s.damping_growth;
                if damping > s.max_damping {
                    break;
                }
                continue;
            }
        };
        let dx = back_substitute(&fac, &normal.upper, &normal.rhs);
        let step_norm = dx.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
        if !step_norm.is_finite() {
            return Err(Error::Numerical("non-finite Gauss-Newton step".into()));
        }
        if step_norm < s.step_norm_tolerance {
            converged = true;
            break;
        }
        let candidate = retract_all(&nodes, &dx, anchor);
        let cand_lin = match linearize(problem, &candidate) {
            Ok(l) => Some(l),
            Err(Error::IllConditionedLog { .. })
            | Err(Error::IllConditionedJacobian { .. })
            | Err(Error::IntervalTooLong { .. }) => None,
            Err(e) => return Err(e),
        };
        match cand_lin {
            Some(cl) if cl.cost <= lin.cost => {
                let rel = (lin.cost - cl.cost) / lin.cost.max(f64::MIN_POSITIVE);
                nodes = candidate;
                lin = cl;
                cost_history.push(lin.cost);
                normal = assemble(&lin, k, anchor);
                damping /= s.damping_growth;
                if damping < 1e-10 {
                    damping = 0.0;
                }
                if rel < s.relative_cost_tolerance || lin.cost == 0.0 {
                    converged = true;
                    break;
                }
            }
            _ => {
                damping = if damping == 0.0 {
                    1e-6
                } else {
                    damping * s.damping_growth
                };
                if damping > s.max_damping {
                    break;
                }
            }
        }
    }

    let (node_covariances, cross_covariances) = if s.compute_covariance {
        let fac = factorize(&normal.diag, &normal.upper)?;
        let (mut d, mut c) = marginal_covariances(&fac, &normal.upper);
        let n = anchor.dims();
        if n > 0 {
            d[0].view_mut((0, 0), (n, 12)).fill(0.0);
            d[0].view_mut((0, 0), (12, n)).fill(0.0);
            if let Some(c0) = c.first_mut() {
                c0.view_mut((0, 0), (n, 12)).fill(0.0);
            }
        }
        (d, c)
    } else {
        (Vec::new(), Vec::new())
    };

    Ok(Solution {
        nodes,
        node_covariances,
        cross_covariances,
        cost_history,
        converged,
        iterations,
        intervals: problem.intervals.clone(),
    })
}
