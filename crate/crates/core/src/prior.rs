//! Motion prior with exogenous inputs: per-segment Magnus transitions,
//! accumulated process noise, input integrals and prior mean propagation.

use nalgebra::{Matrix6, SymmetricEigen};

use crate::error::{Error, Result};
use crate::inputs::{InputProfile, InputSegment};
use crate::liegroup::{curlywedge, LocalState, Matrix12, Pose, Twist, Vector12};

/// Gauss-Legendre nodes on [-1, 1] and their weights (5 points).
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Power-spectral density of the white noise driving the velocity bias.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorHyper {
    qc: Matrix6<f64>,
}

impl PriorHyper {
    /// Validates symmetry (1e-12) and positive definiteness.
    pub fn new(qc: Matrix6<f64>) -> Result<Self> {
        if qc.iter().any(|v| !v.is_finite()) {
            return Err(Error::Hyperparameter("Qc has non-finite entries".into()));
        }
        let asym = (qc - qc.transpose()).norm();
        if asym > 1e-12 * qc.norm().max(1.0) {
            return Err(Error::Hyperparameter(format!(
                "Qc is not symmetric (asymmetry {asym:.3e})"
            )));
        }
        let min_eig = SymmetricEigen::new(qc).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::Hyperparameter(format!(
                "Qc is not positive definite (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { qc })
    }

    pub fn diagonal(diag: &Twist) -> Result<Self> {
        Self::new(Matrix6::from_diagonal(diag))
    }

    /// Same density on all three translational and all three rotational axes.
    pub fn isotropic(translational: f64, rotational: f64) -> Result<Self> {
        Self::diagonal(&Twist::new(
            translational,
            translational,
            translational,
            rotational,
            rotational,
            rotational,
        ))
    }

    pub fn qc(&self) -> &Matrix6<f64> {
        &self.qc
    }

    /// The 12x12 noise-input matrix `[0; I] Qc [0, I]`.
    fn lifted(&self) -> Matrix12 {
        let mut m = Matrix12::zeros();
        m.fixed_view_mut::<6, 6>(6, 6).copy_from(&self.qc);
        m
    }
}

/// Constant and slope parts of the system matrix on one input segment,
/// `A(t') = B + C t'`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentCoeffs {
    pub b: Matrix12,
    pub c: Matrix12,
    pub duration: f64,
    zero: bool,
}

impl SegmentCoeffs {
    pub fn from_segment(seg: &InputSegment) -> Self {
        let b = system_matrix(&seg.v_start, &seg.a_start);
        let mut c = Matrix12::zeros();
        let dv = seg.velocity_slope();
        let da = seg.acceleration_slope();
        let half_dv = curlywedge(&dv) * 0.5;
        c.fixed_view_mut::<6, 6>(0, 0).copy_from(&half_dv);
        c.fixed_view_mut::<6, 6>(6, 0).copy_from(&(curlywedge(&da) * 0.5));
        c.fixed_view_mut::<6, 6>(6, 6).copy_from(&(-half_dv));
        Self {
            b,
            c,
            duration: seg.duration,
            zero: seg.is_zero(),
        }
    }

    /// Whether the segment carries no input, so all quantities take the
    /// constant-velocity closed forms.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn system_matrix_at(&self, t: f64) -> Matrix12 {
        self.b + self.c * t
    }

    /// Three-term Magnus approximation of the transition from local time `t0`
    /// to `t1` within this segment.
    pub fn transition(&self, t0: f64, t1: f64) -> Matrix12 {
        let dt = t1 - t0;
        if self.zero {
            return wnoa_transition(dt);
        }
        let mut omega = self.b * dt;
        if self.c.iter().any(|v| *v != 0.0) {
            let cb = self.c * self.b - self.b * self.c;
            let ccb = self.c * cb - cb * self.c;
            let dt3 = dt * dt * dt;
            omega += self.c * (0.5 * (t1 * t1 - t0 * t0))
                + cb * (dt3 / 12.0)
                + ccb * (dt3 * dt * dt / 240.0);
        }
        omega.exp()
    }
}

/// `A = [[v^curly / 2, I], [a^curly / 2, -v^curly / 2]]`.
pub fn system_matrix(v: &Twist, a: &Twist) -> Matrix12 {
    let mut m = Matrix12::zeros();
    let hv = curlywedge(v) * 0.5;
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&hv);
    m.fixed_view_mut::<6, 6>(0, 6).copy_from(&Matrix6::identity());
    m.fixed_view_mut::<6, 6>(6, 0).copy_from(&(curlywedge(a) * 0.5));
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(&(-hv));
    m
}

pub fn system_matrix_coeffs(profile: &InputProfile, segment_index: usize) -> SegmentCoeffs {
    SegmentCoeffs::from_segment(&profile.segments()[segment_index])
}

pub fn magnus_transition(coeffs: &SegmentCoeffs, t0: f64, t1: f64) -> Matrix12 {
    coeffs.transition(t0, t1)
}

/// Constant-velocity transition `[[I, dt I], [0, I]]`.
pub fn wnoa_transition(dt: f64) -> Matrix12 {
    let mut m = Matrix12::identity();
    m.fixed_view_mut::<6, 6>(0, 6)
        .copy_from(&(Matrix6::identity() * dt));
    m
}

/// Constant-velocity accumulated covariance
/// `[[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]]`.
pub fn wnoa_covariance(dt: f64, hyper: &PriorHyper) -> Matrix12 {
    let qc = hyper.qc();
    let mut m = Matrix12::zeros();
    m.fixed_view_mut::<6, 6>(0, 0)
        .copy_from(&(qc * (dt * dt * dt / 3.0)));
    m.fixed_view_mut::<6, 6>(0, 6).copy_from(&(qc * (dt * dt / 2.0)));
    m.fixed_view_mut::<6, 6>(6, 0).copy_from(&(qc * (dt * dt / 2.0)));
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(&(qc * dt));
    m
}

fn symmetrize(m: &Matrix12) -> Matrix12 {
    (m + m.transpose()) * 0.5
}

fn input_vector(v: &Twist, a: &Twist) -> Vector12 {
    let mut u = Vector12::zeros();
    u.fixed_rows_mut::<6>(0).copy_from(v);
    u.fixed_rows_mut::<6>(6).copy_from(a);
    u
}

/// Transition, input integral and accumulated covariance over `[0, u]` of one
/// segment.
struct SegmentTerms {
    phi: Matrix12,
    integral: Vector12,
    q: Matrix12,
}

fn segment_terms(
    coeffs: &SegmentCoeffs,
    seg: &InputSegment,
    u: f64,
    lifted: &Matrix12,
    hyper: &PriorHyper,
) -> SegmentTerms {
    if coeffs.is_zero() {
        return SegmentTerms {
            phi: wnoa_transition(u),
            integral: Vector12::zeros(),
            q: wnoa_covariance(u, hyper),
        };
    }
    let phi = coeffs.transition(0.0, u);
    let mut integral = Vector12::zeros();
    let mut q = Matrix12::zeros();
    if u > 0.0 {
        let half = 0.5 * u;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let s = half * (1.0 + x);
            let phi_us = coeffs.transition(s, u);
            let input = input_vector(&seg.velocity_at(s), &seg.acceleration_at(s));
            integral += phi_us * input * (w * half);
            q += phi_us * lifted * phi_us.transpose() * (w * half);
        }
    }
    SegmentTerms {
        phi,
        integral,
        q: symmetrize(&q),
    }
}

/// Interval quantities evaluated at one query time.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryBlocks {
    /// Transition from the interval start to the query, `Phi(tau, t_k)`.
    pub phi_from_start: Matrix12,
    /// Transition from the query to the interval end, `Phi(t_{k+1}, tau)`.
    pub phi_to_end: Matrix12,
    /// Input integral from the interval start to the query.
    pub integral: Vector12,
    /// Accumulated covariance from the interval start to the query.
    pub q: Matrix12,
}

/// Everything about one node interval that depends only on the inputs and the
/// hyperparameters. Built once and reused by every solver iteration and query.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalBlocks {
    start: f64,
    end: f64,
    profile: InputProfile,
    hyper: PriorHyper,
    coeffs: Vec<SegmentCoeffs>,
    seg_phi: Vec<Matrix12>,
    /// `Phi(t_n, t_k)` at every knot, `n = 0..=N`.
    prefix_phi: Vec<Matrix12>,
    /// `Phi(t_{k+1}, t_n)` at every knot.
    suffix_phi: Vec<Matrix12>,
    knot_integral: Vec<Vector12>,
    knot_q: Vec<Matrix12>,
    q_inv: Matrix12,
}

impl IntervalBlocks {
    /// Precomputes the interval `[start, end]` from a profile tiling it.
    pub fn new(start: f64, end: f64, profile: InputProfile, hyper: PriorHyper) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Wiring(format!(
                "interval [{start}, {end}] is empty"
            )));
        }
        let span = end - start;
        if (profile.total_duration() - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Wiring(format!(
                "profile spans {} s but the interval spans {span} s",
                profile.total_duration()
            )));
        }
        let lifted = hyper.lifted();
        let n = profile.segments().len();
        let coeffs: Vec<SegmentCoeffs> = profile
            .segments()
            .iter()
            .map(SegmentCoeffs::from_segment)
            .collect();

        let mut seg_phi = Vec::with_capacity(n);
        let mut prefix_phi = vec![Matrix12::identity()];
        let mut knot_integral = vec![Vector12::zeros()];
        let mut knot_q = vec![Matrix12::zeros()];
        for (c, seg) in coeffs.iter().zip(profile.segments()) {
            let terms = segment_terms(c, seg, seg.duration, &lifted, &hyper);
            let i = prefix_phi.len() - 1;
            prefix_phi.push(terms.phi * prefix_phi[i]);
            knot_integral.push(terms.phi * knot_integral[i] + terms.integral);
            knot_q.push(symmetrize(
                &(terms.phi * knot_q[i] * terms.phi.transpose() + terms.q),
            ));
            seg_phi.push(terms.phi);
        }
        let mut suffix_phi = vec![Matrix12::identity(); n + 1];
        for i in (0..n).rev() {
            suffix_phi[i] = suffix_phi[i + 1] * seg_phi[i];
        }
        let q_inv = knot_q[n]
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "accumulated covariance over [{start}, {end}] is not positive definite"
                ))
            })?
            .inverse();
        let q_inv = symmetrize(&q_inv);
        Ok(Self {
            start,
            end,
            profile,
            hyper,
            coeffs,
            seg_phi,
            prefix_phi,
            suffix_phi,
            knot_integral,
            knot_q,
            q_inv,
        })
    }

    /// Constant-velocity interval with no inputs.
    pub fn wnoa(start: f64, end: f64, hyper: PriorHyper) -> Result<Self> {
        Self::new(start, end, InputProfile::zero(end - start)?, hyper)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn profile(&self) -> &InputProfile {
        &self.profile
    }

    pub fn hyper(&self) -> &PriorHyper {
        &self.hyper
    }

    pub fn segment_coeffs(&self) -> &[SegmentCoeffs] {
        &self.coeffs
    }

    /// Per-segment transitions over each full segment.
    pub fn segment_transitions(&self) -> &[Matrix12] {
        &self.seg_phi
    }

    /// `Phi(t_{k+1}, t_k)`.
    pub fn phi(&self) -> &Matrix12 {
        &self.prefix_phi[self.prefix_phi.len() - 1]
    }

    /// `Q(t_{k+1} - t_k)`.
    pub fn q(&self) -> &Matrix12 {
        &self.knot_q[self.knot_q.len() - 1]
    }

    /// `Q(t_{k+1} - t_k)^-1`, the prior factor's information matrix.
    pub fn q_inv(&self) -> &Matrix12 {
        &self.q_inv
    }

    /// Input integral over the whole interval.
    pub fn input_integral(&self) -> &Vector12 {
        &self.knot_integral[self.knot_integral.len() - 1]
    }

    /// Absolute knot times, including both interval ends.
    pub fn knot_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .profile
            .segment_starts()
            .iter()
            .map(|s| self.start + s)
            .collect();
        t.push(self.end);
        t
    }

    fn local_time(&self, t: f64) -> Result<f64> {
        let tol = 1e-9 * self.duration().max(1.0);
        if !(t >= self.start - tol && t <= self.end + tol) {
            return Err(Error::Domain {
                value: t,
                lower: self.start,
                upper: self.end,
            });
        }
        Ok((t - self.start).clamp(0.0, self.profile.total_duration()))
    }

    /// Evaluates the interval quantities at absolute time `t`. Queries on a
    /// knot reuse the cached products.
    pub fn query(&self, t: f64) -> Result<QueryBlocks> {
        let local = self.local_time(t)?;
        let (idx, u) = self.profile.locate(local)?;
        if u == 0.0 {
            return Ok(self.knot_blocks(idx));
        }
        let seg = &self.profile.segments()[idx];
        if u >= seg.duration {
            return Ok(self.knot_blocks(idx + 1));
        }
        let coeffs = &self.coeffs[idx];
        let terms = segment_terms(coeffs, seg, u, &self.hyper.lifted(), &self.hyper);
        let rest = coeffs.transition(u, seg.duration);
        Ok(QueryBlocks {
            phi_from_start: terms.phi * self.prefix_phi[idx],
            phi_to_end: self.suffix_phi[idx + 1] * rest,
            integral: terms.phi * self.knot_integral[idx] + terms.integral,
            q: symmetrize(&(terms.phi * self.knot_q[idx] * terms.phi.transpose() + terms.q)),
        })
    }

    fn knot_blocks(&self, n: usize) -> QueryBlocks {
        QueryBlocks {
            phi_from_start: self.prefix_phi[n],
            phi_to_end: self.suffix_phi[n],
            integral: self.knot_integral[n],
            q: self.knot_q[n],
        }
    }

    /// `Phi(t, t_k)`.
    pub fn transition_at(&self, t: f64) -> Result<Matrix12> {
        Ok(self.query(t)?.phi_from_start)
    }

    /// Input integral from `t_k` to `t`.
    pub fn integral_at(&self, t: f64) -> Result<Vector12> {
        Ok(self.query(t)?.integral)
    }

    /// `Q(t - t_k)`.
    pub fn q_at(&self, t: f64) -> Result<Matrix12> {
        Ok(self.query(t)?.q)
    }

    /// Inputs at absolute time `t` (right-continuous).
    pub fn inputs_at(&self, t: f64) -> Result<(Twist, Twist)> {
        self.profile.evaluate(self.local_time(t)?)
    }

    /// Left limit of the inputs at absolute time `t`.
    pub fn inputs_left_at(&self, t: f64) -> Result<(Twist, Twist)> {
        self.profile.evaluate_left(self.local_time(t)?)
    }

    /// Prior mean of the local state at `t` given the start-node bias.
    pub fn prior_mean_local(&self, bias_k: &Twist, t: f64) -> Result<LocalState> {
        let qb = self.query(t)?;
        let g0 = LocalState::new(Twist::zeros(), *bias_k).to_vector();
        Ok(LocalState::from_vector(&(qb.phi_from_start * g0 + qb.integral)))
    }

    /// Prior covariance at `t` given the local covariance at the start node.
    pub fn prior_covariance_at(&self, p_k: &Matrix12, t: f64) -> Result<Matrix12> {
        let qb = self.query(t)?;
        Ok(symmetrize(
            &(qb.phi_from_start * p_k * qb.phi_from_start.transpose() + qb.q),
        ))
    }
}

/// `Phi(t_{k+1}, t_k)` as the ordered product of per-segment transitions.
pub fn interval_transition(profile: &InputProfile) -> Matrix12 {
    profile
        .segments()
        .iter()
        .fold(Matrix12::identity(), |acc, seg| {
            SegmentCoeffs::from_segment(seg).transition(0.0, seg.duration) * acc
        })
}

/// Input integral from the start of `profile` to local time `t`.
pub fn input_integral(profile: &InputProfile, t: f64, hyper: &PriorHyper) -> Result<Vector12> {
    let blocks = IntervalBlocks::new(0.0, profile.total_duration(), profile.clone(), hyper.clone())?;
    blocks.integral_at(t)
}

/// Accumulated covariance from the start of `profile` to local time `t`.
pub fn accumulated_q(profile: &InputProfile, t: f64, hyper: &PriorHyper) -> Result<Matrix12> {
    let blocks = IntervalBlocks::new(0.0, profile.total_duration(), profile.clone(), hyper.clone())?;
    blocks.q_at(t)
}

/// Propagates the prior mean from the start node `(pose_k, bias_k)` to `t`.
pub fn prior_mean_propagate(
    pose_k: &Pose,
    bias_k: &Twist,
    blocks: &IntervalBlocks,
    t: f64,
) -> Result<(Pose, Twist)> {
    blocks.prior_mean_local(bias_k, t)?.to_global(pose_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::twist;
    use nalgebra::Vector3;

    fn hyper() -> PriorHyper {
        PriorHyper::isotropic(0.3, 0.7).unwrap()
    }

    #[test]
    fn zero_input_coeffs() {
        let p = InputProfile::zero(1.0).unwrap();
        let c = system_matrix_coeffs(&p, 0);
        assert_eq!(c.b, wnoa_transition(1.0) - Matrix12::identity());
        assert_eq!(c.c, Matrix12::zeros());
    }

    #[test]
    fn constant_and_ramp_coeffs() {
        let v = Twist::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let seg = InputSegment::constant(v, Twist::zeros(), 0.3).unwrap();
        let c = SegmentCoeffs::from_segment(&seg);
        let half = curlywedge(&v) * 0.5;
        assert_eq!(c.b.fixed_view::<6, 6>(0, 0).into_owned(), half);
        assert_eq!(c.b.fixed_view::<6, 6>(6, 6).into_owned(), -half);
        assert_eq!(c.c, Matrix12::zeros());

        let w = Twist::new(1.0, 0.0, 0.5, 0.0, 0.2, 1.0);
        let seg = InputSegment::new(Twist::zeros(), w, Twist::zeros(), Twist::zeros(), 0.4).unwrap();
        let c = SegmentCoeffs::from_segment(&seg);
        let expected = curlywedge(&w) * (0.5 / 0.4);
        assert!((c.c.fixed_view::<6, 6>(0, 0).into_owned() - expected).norm() < 1e-14);
        assert_eq!(c.c.fixed_view::<6, 6>(0, 6).into_owned(), Matrix6::zeros());
    }

    #[test]
    fn zero_inputs_reduce_to_constant_velocity() {
        let h = hyper();
        for n in [1usize, 3, 7] {
            let segs = (0..n).map(|_| InputSegment::zero(0.25).unwrap()).collect();
            let p = InputProfile::new(segs).unwrap();
            let dt = 0.25 * n as f64;
            assert_eq!(interval_transition(&p), wnoa_transition(dt));
            let b = IntervalBlocks::new(0.0, dt, p, h.clone()).unwrap();
            assert!((b.q() - wnoa_covariance(dt, &h)).norm() < 1e-14);
            assert_eq!(b.input_integral(), &Vector12::zeros());
        }
    }

    #[test]
    fn stationary_and_constant_velocity_means() {
        let b = IntervalBlocks::wnoa(0.0, 1.0, hyper()).unwrap();
        let pose = Pose::new(Matrix3Ext::rot_z(0.4), Vector3::new(1.0, 2.0, 3.0));
        for t in [0.0, 0.3, 1.0] {
            let (p, w) = prior_mean_propagate(&pose, &Twist::zeros(), &b, t).unwrap();
            assert!((p.matrix() - pose.matrix()).norm() < 1e-14);
            assert_eq!(w, Twist::zeros());
        }
        let bias = Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (p, _) = prior_mean_propagate(&Pose::identity(), &bias, &b, 1.0).unwrap();
        assert!((p.translation() - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn constant_velocity_input_advances_pose() {
        let v = Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let p = InputProfile::new(vec![InputSegment::constant(v, Twist::zeros(), 1.0).unwrap()])
            .unwrap();
        let b = IntervalBlocks::new(0.0, 1.0, p, hyper()).unwrap();
        let g = b.input_integral();
        assert!((g.fixed_rows::<6>(0).into_owned() - v).norm() < 1e-12);
    }

    #[test]
    fn circular_arc_from_constant_input() {
        let omega = 0.5;
        let v = twist(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.0, omega));
        let segs = (0..6)
            .map(|_| InputSegment::constant(v, Twist::zeros(), 0.5).unwrap())
            .collect();
        let b = IntervalBlocks::new(0.0, 3.0, InputProfile::new(segs).unwrap(), hyper()).unwrap();
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            let (pose, _) = prior_mean_propagate(&Pose::identity(), &Twist::zeros(), &b, t).unwrap();
            // circle through the origin with centre on the body y axis
            let p = pose.translation();
            let centre = Vector3::new(0.0, 1.0 / omega, 0.0);
            assert!(((p - centre).norm() - 1.0 / omega).abs() < 1e-4, "t = {t}");
        }
    }

    #[test]
    fn query_on_knots_matches_interior_evaluation() {
        let v0 = Twist::new(0.5, 0.1, 0.0, 0.0, 0.1, 0.6);
        let v1 = Twist::new(0.9, 0.0, 0.0, 0.1, 0.0, -0.2);
        let a0 = Twist::new(0.0, 0.2, 0.0, 0.0, 0.0, 0.3);
        let segs = vec![
            InputSegment::new(v0, v1, a0, Twist::zeros(), 0.3).unwrap(),
            InputSegment::new(v1, v0, Twist::zeros(), a0, 0.2).unwrap(),
        ];
        let b = IntervalBlocks::new(1.0, 1.5, InputProfile::new(segs).unwrap(), hyper()).unwrap();
        let knot = b.query(1.3).unwrap();
        let near = b.query(1.3 - 1e-9).unwrap();
        assert!((knot.phi_from_start - near.phi_from_start).norm() < 1e-7);
        assert!((knot.integral - near.integral).norm() < 1e-7);
        assert!((knot.q - near.q).norm() < 1e-7);
        let end = b.query(1.5).unwrap();
        assert_eq!(end.phi_from_start, *b.phi());
        assert_eq!(end.phi_to_end, Matrix12::identity());
        assert!(matches!(b.query(1.6), Err(Error::Domain { .. })));
    }

    #[test]
    fn rejects_bad_hyper_and_wiring() {
        let mut q = Matrix6::identity();
        q[(0, 0)] = -1.0;
        assert!(matches!(PriorHyper::new(q), Err(Error::Hyperparameter(_))));
        let mut q = Matrix6::identity();
        q[(0, 1)] = 0.5;
        assert!(matches!(PriorHyper::new(q), Err(Error::Hyperparameter(_))));
        let p = InputProfile::zero(1.0).unwrap();
        assert!(matches!(
            IntervalBlocks::new(0.0, 2.0, p, hyper()),
            Err(Error::Wiring(_))
        ));
    }

    struct Matrix3Ext;
    impl Matrix3Ext {
        fn rot_z(a: f64) -> nalgebra::Matrix3<f64> {
            crate::liegroup::so3_exp(&Vector3::new(0.0, 0.0, a))
        }
    }
}
