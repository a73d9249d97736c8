mod common;

use common::*;
use ctgp::factors::{Measurement, StateNode};
use ctgp::inputs::{InputProfile, InputSegment};
use ctgp::interpolation::{interpolate_covariance, interpolate_mean, lambda_psi, JointCovariance};
use ctgp::liegroup::{exp_map, LocalState, Matrix12, Pose, Twist, Vector12};
use ctgp::prior::{prior_mean_propagate, IntervalBlocks, PriorHyper};
use ctgp::solver::{solve, MeasurementFactor, Problem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn hyper() -> PriorHyper {
    PriorHyper::diagonal(&Twist::new(0.5, 0.4, 0.3, 0.2, 0.3, 0.4)).unwrap()
}

fn propagated_nodes(start: StateNode, blocks: &[IntervalBlocks]) -> Vec<StateNode> {
    let mut nodes = vec![start];
    for b in blocks {
        let last = *nodes.last().unwrap();
        let (pose, bias) = prior_mean_propagate(&last.pose, &last.bias, b, b.end()).unwrap();
        nodes.push(StateNode::new(b.end(), pose, bias));
    }
    nodes
}

#[test]
fn weights_at_endpoints() {
    let mut r = rng(1);
    let p = random_profile(&mut r, 4, 0.2, 1.0, 1.0);
    let b = IntervalBlocks::new(1.0, 1.8, p, hyper()).unwrap();
    assert_eq!(lambda_psi(&b, 1.0).unwrap(), (Matrix12::identity(), Matrix12::zeros()));
    assert_eq!(lambda_psi(&b, 1.8).unwrap(), (Matrix12::zeros(), Matrix12::identity()));
    assert!(matches!(lambda_psi(&b, 0.9), Err(ctgp::Error::Domain { .. })));
}

#[test]
fn zero_inputs_match_classical_interpolation() {
    let h = hyper();
    let dt = 1.6;
    let b = IntervalBlocks::new(0.0, dt, InputProfile::zero(dt).unwrap(), h.clone()).unwrap();
    for tau in [0.1, 0.8, 1.5] {
        let (l, p) = lambda_psi(&b, tau).unwrap();
        let qk_inv = cv_covariance(dt, h.qc()).try_inverse().unwrap();
        let psi = cv_covariance(tau, h.qc()) * cv_transition(dt - tau).transpose() * qk_inv;
        let lambda = cv_transition(tau) - psi * cv_transition(dt);
        assert!((p - psi).norm() < 1e-10);
        assert!((l - lambda).norm() < 1e-10);
    }
}

#[test]
fn node_times_are_exact() {
    let mut r = rng(2);
    let p = random_profile(&mut r, 3, 0.2, 1.0, 1.0);
    let b = IntervalBlocks::new(0.0, 0.6, p, hyper()).unwrap();
    let s = StateNode::new(0.0, random_pose(&mut r, 3.0, 2.0), random_twist(&mut r, 1.0));
    let e = StateNode::new(0.6, exp_map(&random_twist(&mut r, 0.5)) * s.pose, random_twist(&mut r, 1.0));
    let q0 = interpolate_mean(&s, &e, &b, 0.0).unwrap();
    assert_eq!(q0.pose, s.pose);
    assert_eq!(q0.bias, s.bias);
    assert_eq!(q0.velocity, s.bias + b.inputs_at(0.0).unwrap().0);
    let q1 = interpolate_mean(&s, &e, &b, 0.6).unwrap();
    assert_eq!(q1.pose, e.pose);
    assert_eq!(q1.bias, e.bias);
}

#[test]
fn nodes_on_the_prior_mean_interpolate_to_the_prior_mean() {
    let mut r = rng(3);
    for _ in 0..10 {
        let p = random_profile(&mut r, 5, 0.2, 1.0, 1.0);
        let b = IntervalBlocks::new(0.0, 1.0, p, hyper()).unwrap();
        let s = StateNode::new(0.0, random_pose(&mut r, 3.0, 2.0), random_twist(&mut r, 0.5));
        let nodes = propagated_nodes(s, std::slice::from_ref(&b));
        for i in 0..=20 {
            let tau = 0.05 * i as f64;
            let q = interpolate_mean(&nodes[0], &nodes[1], &b, tau).unwrap();
            let (pose, bias) = prior_mean_propagate(&s.pose, &s.bias, &b, tau).unwrap();
            assert!((q.pose.matrix() - pose.matrix()).norm() < 1e-8);
            assert!((q.bias - bias).norm() < 1e-8);
        }
    }
}

#[test]
fn velocity_keeps_input_jumps() {
    let mut r = rng(4);
    let w = |z: f64| Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, z);
    let segs = vec![
        InputSegment::constant(w(0.5), Twist::zeros(), 1.0).unwrap(),
        InputSegment::constant(w(-0.5), Twist::zeros(), 1.0).unwrap(),
        InputSegment::constant(w(0.8), Twist::zeros(), 1.0).unwrap(),
    ];
    let b = IntervalBlocks::new(0.0, 3.0, InputProfile::new(segs).unwrap(), hyper()).unwrap();
    let s = StateNode::new(0.0, Pose::identity(), Twist::zeros());
    let mut e = propagated_nodes(s, std::slice::from_ref(&b))[1];
    e.pose = exp_map(&(random_twist(&mut r, 0.05))) * e.pose;
    e.bias += random_twist(&mut r, 0.05);
    for (knot, jump) in [(1.0, -1.0), (2.0, 1.3)] {
        let q = interpolate_mean(&s, &e, &b, knot).unwrap();
        let dv = q.velocity - q.velocity_left;
        assert!((dv - Twist::new(0.0, 0.0, 0.0, 0.0, 0.0, jump)).norm() < 1e-6);
        let before = interpolate_mean(&s, &e, &b, knot - 1e-9).unwrap();
        let after = interpolate_mean(&s, &e, &b, knot + 1e-9).unwrap();
        assert!((before.pose.matrix() - after.pose.matrix()).norm() < 1e-8);
        assert!((before.bias - after.bias).norm() < 1e-8);
    }
}

#[test]
fn covariance_at_node_time_is_node_block() {
    let mut r = rng(5);
    let p = random_profile(&mut r, 3, 0.2, 1.0, 1.0);
    let b = IntervalBlocks::new(0.0, 0.6, p, hyper()).unwrap();
    let s = StateNode::new(0.0, random_pose(&mut r, 3.0, 2.0), random_twist(&mut r, 1.0));
    let e = propagated_nodes(s, std::slice::from_ref(&b))[1];
    let l = Matrix12::from_fn(|_, _| r.random_range(-0.1..0.1)) + Matrix12::identity() * 0.3;
    let cov = JointCovariance { start: l * l.transpose(), end: l.transpose() * l, cross: None };
    let c0 = interpolate_covariance(&s, &e, &cov, &b, 0.0).unwrap();
    assert!((c0 - cov.start).norm() < 1e-12);
    let c1 = interpolate_covariance(&s, &e, &cov, &b, 0.6).unwrap();
    assert!((c1 - cov.end).norm() < 1e-12);
    let mid = interpolate_covariance(&s, &e, &cov, &b, 0.35).unwrap();
    assert!((mid - mid.transpose()).norm() < 1e-10 * mid.norm());
    assert!(min_eigenvalue(&mid) >= -1e-10 * mid.trace());
}

/// Finite-difference Jacobian of `f` (12 outputs in a left-perturbation
/// chart) with respect to a 12-vector input perturbation.
fn fd12<F: Fn(&[f64; 12]) -> DVector<f64>>(f: F) -> DMatrix<f64> {
    let h = 1e-6;
    let mut jac = DMatrix::zeros(12, 12);
    for c in 0..12 {
        let mut p = [0.0; 12];
        p[c] = h;
        let plus = f(&p);
        p[c] = -h;
        let minus = f(&p);
        jac.set_column(c, &((plus - minus) / (2.0 * h)));
    }
    jac
}

fn chart(reference: &StateNode, pose: &Pose, bias: &Twist) -> DVector<f64> {
    let d = ctgp::liegroup::log_map(&(*pose * reference.pose.inverse())).unwrap();
    let mut out = DVector::zeros(12);
    out.rows_mut(0, 6).copy_from(&d);
    out.rows_mut(6, 6).copy_from(&(bias - reference.bias));
    out
}

#[test]
fn prior_only_covariance_matches_linearized_propagation() {
    let mut r = rng(6);
    let h = hyper();
    let profiles: Vec<InputProfile> = (0..3).map(|_| random_profile(&mut r, 4, 0.15, 1.0, 1.0)).collect();
    let times = [0.0, 0.6, 1.2, 1.8];
    let start = StateNode::new(0.0, random_pose(&mut r, 2.0, 1.0), random_twist(&mut r, 0.5));
    let blocks: Vec<IntervalBlocks> = (0..3)
        .map(|i| IntervalBlocks::new(times[i], times[i + 1], profiles[i].clone(), h.clone()).unwrap())
        .collect();
    let nodes = propagated_nodes(start, &blocks);
    let l = Matrix12::from_fn(|_, _| r.random_range(-0.05..0.05)) + Matrix12::identity() * 0.1;
    let p0 = l * l.transpose();
    let mut problem = Problem::new(nodes.clone(), &profiles, &h).unwrap();
    problem.add(MeasurementFactor::at_node(
        0,
        Measurement::StatePrior { pose: start.pose, bias: start.bias, covariance: p0 },
    ));
    let sol = solve(&problem).unwrap();

    let to_d = |m: &Matrix12| DMatrix::from_column_slice(12, 12, m.as_slice());
    for tau in [0.25, 0.6, 0.9, 1.55] {
        let k = sol.interval_of(tau).unwrap();
        // Oracle: linearized prior propagation. Noise enters once per
        // interval through the local chart of its start node.
        let from = |j: usize, dx: &[f64; 12]| {
            let chain = propagated_nodes(nodes[j].retract(dx), &blocks[j..k]);
            let sk = chain[k - j];
            prior_mean_propagate(&sk.pose, &sk.bias, &blocks[k], tau).unwrap()
        };
        let (pose_ref, bias_ref) = from(0, &[0.0; 12]);
        let reference = StateNode::new(tau, pose_ref, bias_ref);
        let local_jac = |j: usize, t: f64, target: &StateNode| {
            let local = blocks[j].prior_mean_local(&nodes[j].bias, t).unwrap();
            fd12(|dx| {
                let g = local.to_vector() + Vector12::from_column_slice(dx);
                let (pose, bias) = LocalState::from_vector(&g).to_global(&nodes[j].pose).unwrap();
                chart(target, &pose, &bias)
            })
        };
        let g0 = fd12(|dx| {
            let (pose, bias) = from(0, dx);
            chart(&reference, &pose, &bias)
        });
        let mut oracle = &g0 * to_d(&p0) * g0.transpose();
        for j in 0..k {
            let gj = fd12(|dx| {
                let (pose, bias) = from(j + 1, dx);
                chart(&reference, &pose, &bias)
            });
            let mj = local_jac(j, blocks[j].end(), &nodes[j + 1]);
            let gm = &gj * mj;
            oracle += &gm * to_d(blocks[j].q()) * gm.transpose();
        }
        let m = local_jac(k, tau, &reference);
        let qb = blocks[k].query(tau).unwrap();
        oracle += &m * to_d(&qb.q) * m.transpose();
        let got = sol.query(tau).unwrap().covariance.unwrap();
        let got = DMatrix::from_column_slice(12, 12, got.as_slice());
        let err = (&got - &oracle).abs().max();
        assert!(err < 1e-8 * oracle.abs().max().max(1.0), "tau {tau}: {err:.3e}");
    }
}
