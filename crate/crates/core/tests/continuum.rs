mod common;

use ctgp::continuum::{
    estimate_shape, integrated_moment, position_errors, tensions_to_inputs, RodModel,
    RodSimulator, ShapeConfig, ShapeMeasurement, TendonRoute,
};
use ctgp::liegroup::{exp_map, wedge, Pose, Twist};
use ctgp::{Error, PriorHyper};
use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3};
use proptest::prelude::*;

fn rod() -> RodModel {
    RodModel::round(0.2, 1e-3, 58e9, 0.3, 20).unwrap()
}

fn tendon(azimuth: f64, end: f64, tension: f64) -> TendonRoute {
    TendonRoute {
        offset_radius: 8e-3,
        azimuth,
        termination_arclength: end,
        tension,
    }
}

fn hyper() -> PriorHyper {
    PriorHyper::diagonal(&Twist::new(1e-2, 1e-2, 1e-2, 1e3, 1e3, 1e3)).unwrap()
}

fn r_pose() -> Matrix6<f64> {
    Matrix6::from_diagonal(&Twist::new(4e-7, 4e-7, 4e-7, 2.5e-4, 2.5e-4, 2.5e-4))
}

fn disks_with_base(rod: &RodModel) -> Vec<f64> {
    let mut d = vec![0.0];
    d.extend(rod.disk_arclengths.iter().copied());
    d
}

#[test]
fn one_newton_at_five_millimetres_gives_five_millinewton_metres() {
    let rod = rod();
    let t = TendonRoute {
        offset_radius: 5e-3,
        azimuth: 0.3,
        termination_arclength: 0.1,
        tension: 1.0,
    };
    let m = t.point_moment();
    assert!((m.norm() - 5e-3).abs() < 1e-15);
    let plane_normal = Vector3::new(-(0.3f64).sin(), 0.3f64.cos(), 0.0);
    assert!((m.normalize() - plane_normal).norm() < 1e-12);

    let arcs = rod.node_arclengths(11).unwrap();
    let profiles = tensions_to_inputs(&rod, &[t], &arcs).unwrap();
    let total = integrated_moment(&rod, &profiles);
    assert!((total - m).norm() < 1e-15, "{total}");
    for p in &profiles {
        for seg in p.segments() {
            assert!(seg.velocity_at(0.0).norm() == 0.0);
        }
    }
}

#[test]
fn zero_tensions_give_zero_profiles() {
    let rod = rod();
    let arcs = rod.node_arclengths(6).unwrap();
    let profiles = tensions_to_inputs(&rod, &[tendon(0.0, 0.1, 0.0)], &arcs).unwrap();
    assert_eq!(profiles.len(), 5);
    assert!(profiles.iter().all(|p| p.is_zero() && p.segments().len() == 1));
}

#[test]
fn geometry_and_coverage_errors() {
    let rod = rod();
    let arcs = rod.node_arclengths(5).unwrap();
    for end in [0.0, -0.1, 0.25] {
        assert!(matches!(
            tensions_to_inputs(&rod, &[tendon(0.0, end, 1.0)], &arcs),
            Err(Error::Geometry(_))
        ));
    }
    assert!(matches!(
        tensions_to_inputs(&rod, &[tendon(0.0, 0.1, -1.0)], &arcs),
        Err(Error::Geometry(_))
    ));
    assert!(matches!(
        tensions_to_inputs(&rod, &[], &[0.0, 0.1]),
        Err(Error::Coverage { .. })
    ));
    assert!(RodModel::new(0.2, Twist::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0), vec![]).is_err());
}

#[test]
fn simulator_bends_into_the_analytic_arc() {
    let rod = rod();
    let t = tendon(0.0, rod.length, 1.5);
    let kappa = t.point_moment()[1] / rod.stiffness[4];
    let sim = RodSimulator::new(rod.clone(), vec![t], Vector3::zeros());
    let poses = sim.poses(&rod.disk_arclengths).unwrap();
    for (s, p) in rod.disk_arclengths.iter().zip(&poses) {
        let expected = Vector3::new((1.0 - (kappa * s).cos()) / kappa, 0.0, (kappa * s).sin() / kappa);
        assert!((p.world_position() - expected).norm() < 1e-9, "{s}");
    }
}

#[test]
fn tip_force_fixed_point_balances_the_moment() {
    let rod = rod();
    let force = Vector3::new(0.05, 0.0, 0.0);
    let sim = RodSimulator::new(rod.clone(), vec![], force);
    let poses = sim.poses(&[rod.length]).unwrap();
    let tip = poses[0].world_position();
    // Small-deflection cantilever: F L^3 / (3 E I).
    let expected = force[0] * rod.length.powi(3) / (3.0 * rod.stiffness[4]);
    assert!(tip[0] > 0.0);
    assert!((tip[0] - expected).abs() < 0.1 * expected, "{} vs {expected}", tip[0]);
}

/// Integrates `T' = varpi^ T` for the model prior mean with a single
/// triangular bump, written out independently of the library.
fn model_tip_pose(rod: &RodModel, t: &TendonRoute, base_strain: &Twist) -> Pose {
    let w = rod.length / 50.0;
    let c = t.termination_arclength.clamp(0.5 * w, rod.length - 0.5 * w);
    let mut jump = Twist::zeros();
    jump.fixed_rows_mut::<3>(3).copy_from(&t.point_moment());
    let jump = jump.component_div(&rod.stiffness);
    let cumulative = |s: f64| {
        let x = (s - (c - 0.5 * w)) / w;
        if x <= 0.0 {
            0.0
        } else if x <= 0.5 {
            2.0 * x * x
        } else if x <= 1.0 {
            1.0 - 2.0 * (1.0 - x) * (1.0 - x)
        } else {
            1.0
        }
    };
    let varpi = |s: f64| -base_strain + jump * cumulative(s);
    let n = 20000;
    let h = rod.length / n as f64;
    let mut m = Matrix4::identity();
    for i in 0..n {
        let s = i as f64 * h;
        let f = |s: f64, m: &Matrix4<f64>| wedge(&varpi(s)) * m;
        let k1 = f(s, &m);
        let k2 = f(s + 0.5 * h, &(m + k1 * (0.5 * h)));
        let k3 = f(s + 0.5 * h, &(m + k2 * (0.5 * h)));
        let k4 = f(s + h, &(m + k3 * h));
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Pose::from_matrix(&m).normalized()
}

#[test]
fn consistent_tip_pose_is_reproduced() {
    let rod = rod();
    let t = tendon(0.7, 0.13, 1.2);
    let mut base_strain = Twist::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
    base_strain
        .fixed_rows_mut::<3>(3)
        .copy_from(&t.point_moment().component_div(&rod.stiffness.fixed_rows::<3>(3)));
    let tip = model_tip_pose(&rod, &t, &base_strain);
    let meas = ShapeMeasurement::tip_pose(&rod, tip, r_pose());
    let config = ShapeConfig::new(hyper(), 11, true);
    let est = estimate_shape(&rod, &[t], &[meas], &config).unwrap();
    let post = est.poses(&[rod.length]).unwrap()[0];
    assert!((post.world_position() - tip.world_position()).norm() < 1e-6);
    assert!(est.solution.converged);
}

#[test]
fn base_pose_is_anchored_exactly() {
    let rod = rod();
    let base = exp_map(&Twist::new(0.01, -0.02, 0.03, 0.1, -0.2, 0.3));
    let mut config = ShapeConfig::new(hyper(), 11, true);
    config.base = base;
    let tendons = [tendon(0.0, 0.1, 2.0)];
    let meas = ShapeMeasurement::tip_position(
        &rod,
        base.inverse().transform_point(&Vector3::new(0.03, 0.0, 0.19)),
        Matrix3::identity() * 4e-7,
    );
    let est = estimate_shape(&rod, &tendons, &[meas], &config).unwrap();
    assert_eq!(est.solution.nodes[0].pose, base);
    assert_eq!(est.poses(&[0.0]).unwrap()[0], base);
    assert!(est.solution.node_covariances[0]
        .fixed_view::<6, 6>(0, 0)
        .iter()
        .all(|x| *x == 0.0));
    // The base strain stays free.
    assert!(est.solution.node_covariances[0][(9, 9)] > 0.0);
}

#[test]
fn straight_rod_stays_straight() {
    let rod = rod();
    let meas = ShapeMeasurement::tip_position(
        &rod,
        Vector3::new(0.0, 0.0, rod.length),
        Matrix3::identity() * 4e-7,
    );
    let est = estimate_shape(&rod, &[tendon(1.0, 0.1, 0.0)], &[meas], &ShapeConfig::new(hyper(), 11, true))
        .unwrap();
    for (s, p) in rod
        .disk_arclengths
        .iter()
        .zip(est.poses(&rod.disk_arclengths).unwrap())
    {
        let x = p.world_position();
        assert!(x.xy().norm() < 1e-6 && (x[2] - s).abs() < 1e-6, "{s}: {x}");
    }
}

#[test]
fn zero_tensions_match_the_no_input_estimator() {
    let rod = rod();
    let sim = RodSimulator::new(rod.clone(), vec![], Vector3::new(0.03, -0.02, 0.0));
    let tip = sim.poses(&[rod.length]).unwrap()[0];
    let meas = [ShapeMeasurement::tip_pose(&rod, tip, r_pose())];
    let tendons = [tendon(0.0, 0.1, 0.0), tendon(2.0, 0.2, 0.0)];
    let with = estimate_shape(&rod, &tendons, &meas, &ShapeConfig::new(hyper(), 11, true)).unwrap();
    let without = estimate_shape(&rod, &tendons, &meas, &ShapeConfig::new(hyper(), 11, false)).unwrap();
    for (a, b) in with.solution.nodes.iter().zip(&without.solution.nodes) {
        assert!((a.pose.matrix() - b.pose.matrix()).norm() < 1e-10);
        assert!((a.bias - b.bias).norm() < 1e-10);
    }
}

fn two_segment_tendons(t1: f64, t2: f64, az1: f64, az2: f64) -> Vec<TendonRoute> {
    vec![tendon(az1, 0.1, t1), tendon(az2, 0.2, t2)]
}

#[test]
fn tip_pose_with_eleven_nodes_recovers_the_simulated_shape() {
    let rod = rod();
    let tendons = two_segment_tendons(1.5, 1.0, 0.0, std::f64::consts::PI);
    let sim = RodSimulator::new(rod.clone(), tendons.clone(), Vector3::zeros());
    let disks = disks_with_base(&rod);
    let truth = sim.poses(&disks).unwrap();
    let meas = [ShapeMeasurement::tip_pose(&rod, truth[truth.len() - 1], r_pose())];
    let est = estimate_shape(&rod, &tendons, &meas, &ShapeConfig::new(hyper(), 11, true)).unwrap();
    let (rmse, _) = position_errors(&est.poses(&disks).unwrap(), &truth);
    assert!(rmse < 1e-3, "rmse {rmse}");
}

#[test]
fn inputs_beat_the_plain_prior_with_tip_position_only() {
    let rod = rod();
    let disks = disks_with_base(&rod);
    let configs = [
        (two_segment_tendons(1.5, 0.8, 0.0, std::f64::consts::PI), Vector3::new(0.0, 0.02, 0.0)),
        (two_segment_tendons(0.5, 1.5, 1.0, 1.0), Vector3::new(-0.02, 0.0, 0.0)),
        (two_segment_tendons(2.0, 0.5, 2.0, 0.0), Vector3::new(0.01, 0.01, 0.0)),
    ];
    for (tendons, force) in configs {
        let sim = RodSimulator::new(rod.clone(), tendons.clone(), force);
        let truth = sim.poses(&disks).unwrap();
        let meas = [ShapeMeasurement::tip_position(
            &rod,
            truth[truth.len() - 1].world_position(),
            Matrix3::identity() * 4e-7,
        )];
        let rmse = |inputs: bool| {
            let est =
                estimate_shape(&rod, &tendons, &meas, &ShapeConfig::new(hyper(), 11, inputs)).unwrap();
            position_errors(&est.poses(&disks).unwrap(), &truth).0
        };
        let (with, without) = (rmse(true), rmse(false));
        assert!(with < without, "with {with} without {without}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bumps_preserve_the_total_moment(
        tensions in prop::collection::vec(0.0f64..3.0, 1..4),
        ends in prop::collection::vec(0.01f64..0.19, 4),
        azimuths in prop::collection::vec(-3.0f64..3.0, 4),
        nodes in 2usize..15,
    ) {
        let rod = rod();
        let tendons: Vec<TendonRoute> = tensions
            .iter()
            .enumerate()
            .map(|(i, t)| tendon(azimuths[i], ends[i], *t))
            .collect();
        let arcs = rod.node_arclengths(nodes).unwrap();
        let profiles = tensions_to_inputs(&rod, &tendons, &arcs).unwrap();
        let expected: Vector3<f64> = tendons.iter().map(TendonRoute::point_moment).sum();
        let total = integrated_moment(&rod, &profiles);
        prop_assert!((total - expected).norm() < 1e-12 * (1.0 + expected.norm()));
        for (p, w) in profiles.iter().zip(arcs.windows(2)) {
            prop_assert!((p.total_duration() - (w[1] - w[0])).abs() < 1e-12);
        }
    }
}
