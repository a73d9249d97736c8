//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ctgp::factors::StateNode;
use ctgp::inputs::{InputProfile, InputSegment};
use ctgp::liegroup::{curlywedge, wedge, Matrix12, Pose, Twist, Vector12};
use nalgebra::{DMatrix, DVector, Matrix4, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_twist(rng: &mut ChaCha8Rng, scale: f64) -> Twist {
    Twist::from_vec(uniform_vec(rng, 6, scale))
}

/// Random twist with the given norm bound on each of its two halves.
pub fn random_twist_bounded(rng: &mut ChaCha8Rng, lin: f64, ang: f64) -> Twist {
    let mut x = random_twist(rng, 1.0);
    let l = x.fixed_rows::<3>(0).norm();
    let a = x.fixed_rows::<3>(3).norm();
    let sl = rng.random_range(0.0..lin) / l.max(1e-12);
    let sa = rng.random_range(0.0..ang) / a.max(1e-12);
    for i in 0..3 {
        x[i] *= sl;
        x[i + 3] *= sa;
    }
    x
}

/// Random twist whose norm is at most `bound`.
pub fn twist_with_norm_at_most(rng: &mut ChaCha8Rng, bound: f64) -> Twist {
    let x = random_twist(rng, 1.0);
    x * (rng.random_range(0.0..bound) / x.norm().max(1e-12))
}

pub fn random_pose(rng: &mut ChaCha8Rng, lin: f64, ang: f64) -> Pose {
    ctgp::liegroup::exp_map(&random_twist_bounded(rng, lin, ang))
}

/// Truncated Taylor series of the 4x4 matrix exponential.
pub fn taylor_expm4(m: &Matrix4<f64>, terms: usize) -> Matrix4<f64> {
    let mut acc = Matrix4::identity();
    let mut term = Matrix4::identity();
    for n in 1..terms {
        term = term * m / n as f64;
        acc += term;
    }
    acc
}

/// Truncated series `sum_n X^n / (n+1)!` with `X = curlywedge(x)`.
pub fn series_left_jacobian(x: &Twist, terms: usize) -> Matrix6<f64> {
    let big = curlywedge(x);
    let mut acc = Matrix6::identity();
    let mut term = Matrix6::identity();
    for n in 1..terms {
        term = term * big / (n + 1) as f64;
        acc += term;
    }
    acc
}

/// Matrix exponential by scaling and squaring around a long Taylor series.
pub fn expm_scaling_squaring(m: &Matrix12) -> Matrix12 {
    let norm = m.norm();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.1 {
        s += 1;
    }
    let a = m / 2f64.powi(s);
    let mut acc = Matrix12::identity();
    let mut term = Matrix12::identity();
    for n in 1..30 {
        term = term * a / n as f64;
        acc += term;
    }
    for _ in 0..s {
        acc = acc * acc;
    }
    acc
}

/// System matrix written out independently of the library.
pub fn system_matrix(v: &Twist, a: &Twist) -> Matrix12 {
    let mut m = Matrix12::zeros();
    let hv = curlywedge(v) * 0.5;
    let ha = curlywedge(a) * 0.5;
    for r in 0..6 {
        for c in 0..6 {
            m[(r, c)] = hv[(r, c)];
            m[(r + 6, c + 6)] = -hv[(r, c)];
            m[(r + 6, c)] = ha[(r, c)];
        }
        m[(r, r + 6)] = 1.0;
    }
    m
}

fn profile_inputs(p: &InputProfile, t: f64, left: bool) -> (Twist, Twist) {
    if left {
        p.evaluate_left(t).unwrap()
    } else {
        p.evaluate(t).unwrap()
    }
}

/// Splits `[t0, t1]` at the profile's knots so RK4 never steps over a jump.
fn knot_pieces(p: &InputProfile, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![t0];
    for s in p.segment_starts() {
        if *s > t0 + 1e-12 && *s < t1 - 1e-12 {
            cuts.push(*s);
        }
    }
    cuts.push(t1);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Generic RK4 on `y' = f(t, y)` over one smooth piece; inputs are taken from
/// inside the piece so knots are approached from the correct side.
fn rk4_piece<F>(t0: f64, t1: f64, step: f64, y0: DVector<f64>, f: F) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>, bool) -> DVector<f64>,
{
    let n = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let last = i + 1 == n;
        let k1 = f(t, &y, false);
        let k2 = f(t + 0.5 * h, &(&y + &k1 * (0.5 * h)), false);
        let k3 = f(t + 0.5 * h, &(&y + &k2 * (0.5 * h)), false);
        let k4 = f(t + h, &(&y + &k3 * h), last);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// RK4 integration of `Phi' = A(t) Phi` across the profile from `t0` to `t1`.
pub fn rk4_transition(p: &InputProfile, t0: f64, t1: f64, step: f64) -> Matrix12 {
    let mut phi = Matrix12::identity();
    for (a, b) in knot_pieces(p, t0, t1) {
        let n = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let sys = |t: f64, left: bool| {
            let (v, acc) = profile_inputs(p, t, left);
            system_matrix(&v, &acc)
        };
        for i in 0..n {
            let t = a + i as f64 * h;
            let a0 = sys(t, false);
            let am = sys(t + 0.5 * h, false);
            let a1 = sys(t + h, i + 1 == n);
            let k1 = a0 * phi;
            let k2 = am * (phi + k1 * (0.5 * h));
            let k3 = am * (phi + k2 * (0.5 * h));
            let k4 = a1 * (phi + k3 * h);
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    phi
}

/// RK4 integration of the mean ODE `g' = A g + [v; a]` from `g0`.
pub fn rk4_mean(p: &InputProfile, g0: &Vector12, t1: f64, step: f64) -> Vector12 {
    let mut g = DVector::from_column_slice(g0.as_slice());
    for (a, b) in knot_pieces(p, 0.0, t1) {
        g = rk4_piece(a, b, step, g, |t, y, end| {
            let (v, acc) = profile_inputs(p, t, end);
            let m = system_matrix(&v, &acc);
            let y = Vector12::from_column_slice(y.as_slice());
            let mut u = Vector12::zeros();
            u.fixed_rows_mut::<6>(0).copy_from(&v);
            u.fixed_rows_mut::<6>(6).copy_from(&acc);
            DVector::from_column_slice((m * y + u).as_slice())
        });
    }
    Vector12::from_column_slice(g.as_slice())
}

/// RK4 integration of the Lyapunov ODE `Q' = A Q + Q A^T + L` with
/// `L = [0; I] Qc [0, I]`, from `Q(0) = 0`.
pub fn rk4_covariance(p: &InputProfile, qc: &Matrix6<f64>, t1: f64, step: f64) -> Matrix12 {
    let mut lifted = Matrix12::zeros();
    lifted.fixed_view_mut::<6, 6>(6, 6).copy_from(qc);
    let mut q = DVector::zeros(144);
    for (a, b) in knot_pieces(p, 0.0, t1) {
        q = rk4_piece(a, b, step, q, |t, y, end| {
            let (v, acc) = profile_inputs(p, t, end);
            let m = system_matrix(&v, &acc);
            let y = Matrix12::from_column_slice(y.as_slice());
            DVector::from_column_slice((m * y + y * m.transpose() + lifted).as_slice())
        });
    }
    Matrix12::from_column_slice(q.as_slice())
}

/// Integrates the full nonlinear kinematics `T' = varpi^ T` with constant
/// bias and the profile's velocity input (no acceleration input).
pub fn rk4_pose(p: &InputProfile, t0_pose: &Pose, bias: &Twist, t1: f64, step: f64) -> Pose {
    let mut y = DVector::from_column_slice(t0_pose.matrix().as_slice());
    for (a, b) in knot_pieces(p, 0.0, t1) {
        y = rk4_piece(a, b, step, y, |t, y, end| {
            let (v, _) = profile_inputs(p, t, end);
            let m = Matrix4::from_column_slice(y.as_slice());
            DVector::from_column_slice((wedge(&(bias + v)) * m).as_slice())
        });
    }
    Pose::from_matrix(&Matrix4::from_column_slice(y.as_slice())).normalized()
}

/// Random piecewise-linear profile with `n` segments of duration `dt` each.
pub fn random_profile(
    rng: &mut ChaCha8Rng,
    n: usize,
    dt: f64,
    v_scale: f64,
    a_scale: f64,
) -> InputProfile {
    let mut v = random_twist(rng, v_scale);
    let mut a = random_twist(rng, a_scale);
    let mut segs = Vec::with_capacity(n);
    for _ in 0..n {
        let v1 = random_twist(rng, v_scale);
        let a1 = random_twist(rng, a_scale);
        segs.push(InputSegment::new(v, v1, a, a1, dt).unwrap());
        v = v1;
        a = a1;
    }
    InputProfile::new(segs).unwrap()
}

/// Central finite difference of `f` with respect to the 12 perturbation
/// coordinates of `nodes[which]`.
pub fn fd_jacobian<F>(nodes: &[StateNode], which: usize, step: f64, f: F) -> DMatrix<f64>
where
    F: Fn(&[StateNode]) -> DVector<f64>,
{
    let base = f(nodes);
    let mut jac = DMatrix::zeros(base.len(), 12);
    for c in 0..12 {
        let mut dx = [0.0; 12];
        dx[c] = step;
        let mut plus = nodes.to_vec();
        plus[which] = nodes[which].retract(&dx);
        dx[c] = -step;
        let mut minus = nodes.to_vec();
        minus[which] = nodes[which].retract(&dx);
        let col = (f(&plus) - f(&minus)) / (2.0 * step);
        jac.set_column(c, &col);
    }
    jac
}

pub fn rel_frobenius(a: &Matrix12, b: &Matrix12) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn min_eigenvalue(m: &Matrix12) -> f64 {
    nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5)
        .eigenvalues
        .min()
}

/// Algebraic circle fit through planar points; returns the centre, the
/// radius and the largest geometric residual.
pub fn circle_fit(points: &[(f64, f64)]) -> ((f64, f64), f64, f64) {
    let n = points.len();
    let mut a = DMatrix::zeros(n, 3);
    let mut b = DVector::zeros(n);
    for (i, (x, y)) in points.iter().enumerate() {
        a[(i, 0)] = 2.0 * x;
        a[(i, 1)] = 2.0 * y;
        a[(i, 2)] = 1.0;
        b[i] = x * x + y * y;
    }
    let sol = least_squares(&a, &b);
    let (cx, cy) = (sol[0], sol[1]);
    let r = (sol[2] + cx * cx + cy * cy).sqrt();
    let worst = points
        .iter()
        .map(|(x, y)| (((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r).abs())
        .fold(0.0, f64::max);
    ((cx, cy), r, worst)
}

pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-14).unwrap()
}

/// Fits `c0 + c1 t + c2 t^2 + c3 t^3 + s sin(w t) + c cos(w t)`; returns the
/// sinusoid amplitude and the largest residual.
pub fn sinusoid_fit(times: &[f64], values: &[f64], omega: f64) -> (f64, f64) {
    let n = times.len();
    let mut a = DMatrix::zeros(n, 6);
    for (i, t) in times.iter().enumerate() {
        for p in 0..4 {
            a[(i, p)] = t.powi(p as i32);
        }
        a[(i, 4)] = (omega * t).sin();
        a[(i, 5)] = (omega * t).cos();
    }
    let b = DVector::from_column_slice(values);
    let c = least_squares(&a, &b);
    let residual = (&a * &c - &b).amax();
    (c[4].hypot(c[5]), residual)
}

/// Constant-velocity transition `[[I, dt I], [0, I]]`.
pub fn cv_transition(dt: f64) -> Matrix12 {
    let mut m = Matrix12::identity();
    for i in 0..6 {
        m[(i, i + 6)] = dt;
    }
    m
}

/// Constant-velocity covariance `[[dt^3/3, dt^2/2], [dt^2/2, dt]] (x) Qc`.
pub fn cv_covariance(dt: f64, qc: &Matrix6<f64>) -> Matrix12 {
    let mut m = Matrix12::zeros();
    for r in 0..6 {
        for c in 0..6 {
            let q = qc[(r, c)];
            m[(r, c)] = dt.powi(3) / 3.0 * q;
            m[(r, c + 6)] = dt.powi(2) / 2.0 * q;
            m[(r + 6, c)] = dt.powi(2) / 2.0 * q;
            m[(r + 6, c + 6)] = dt * q;
        }
    }
    m
}
