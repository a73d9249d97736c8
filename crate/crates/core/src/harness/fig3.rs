//! Prior and posterior of a 3 s planar drive with angular velocity or
//! angular acceleration inputs and one terminal position measurement.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::factors::{Measurement, StateNode};
use crate::harness::metrics::world_position_covariance;
use crate::harness::simulate::planar_velocity;
use crate::inputs::{InputProfile, InputSegment};
use crate::liegroup::{Pose, Twist};
use crate::prior::PriorHyper;
use crate::solver::{precompute_intervals, solve, Anchor, MeasurementFactor, Problem, Solution};

pub const DURATION: f64 = 3.0;
pub const FORWARD_SPEED: f64 = 1.0;
/// Yaw rates (rad/s) of the three arcs, one second each.
pub const ARC_YAW_RATES: [f64; 3] = [0.8, -1.2, 0.5];
/// Peak angular acceleration (rad/s^2) of the sinusoidal variant.
pub const ACCEL_AMPLITUDE: f64 = 1.5;
pub const ACCEL_SEGMENTS: usize = 30;
pub const OUTPUT_RATE: f64 = 100.0;
/// Offset of the terminal measurement from the prior end position (m).
pub const MEASUREMENT_OFFSET: [f64; 3] = [0.1, -0.2, 0.0];
pub const MEASUREMENT_SIGMA: f64 = 0.05;
pub const QC: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Velocity,
    Acceleration,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Velocity => "velocity",
            Variant::Acceleration => "acceleration",
        })
    }
}

/// One output sample: world position, velocity (both one-sided limits) and
/// the 3-sigma world-position envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fig3Row {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Twist,
    pub velocity_left: Twist,
    pub sigma3: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct Fig3Result {
    pub variant: Variant,
    pub prior: Vec<Fig3Row>,
    pub posterior: Vec<Fig3Row>,
    pub measurement: Vector3<f64>,
    pub measurement_sigma: f64,
    pub posterior_solution: Solution,
}

/// Input profile of a variant, model convention.
pub fn inputs(variant: Variant) -> Result<InputProfile> {
    match variant {
        Variant::Velocity => InputProfile::new(
            ARC_YAW_RATES
                .iter()
                .map(|w| InputSegment::constant(planar_velocity(FORWARD_SPEED, *w), Twist::zeros(), 1.0))
                .collect::<Result<_>>()?,
        ),
        Variant::Acceleration => {
            let v = planar_velocity(FORWARD_SPEED, 0.0);
            let dt = DURATION / ACCEL_SEGMENTS as f64;
            let accel = |t: f64| {
                let alpha = ACCEL_AMPLITUDE * (2.0 * std::f64::consts::PI * t / DURATION).sin();
                Twist::new(0.0, 0.0, 0.0, 0.0, 0.0, -alpha)
            };
            InputProfile::new(
                (0..ACCEL_SEGMENTS)
                    .map(|i| {
                        let t0 = i as f64 * dt;
                        InputSegment::new(v, v, accel(t0), accel(t0 + dt), dt)
                    })
                    .collect::<Result<_>>()?,
            )
        }
    }
}

fn sample(solution: &Solution, times: &[f64]) -> Result<Vec<Fig3Row>> {
    solution
        .query_many(times)?
        .into_iter()
        .map(|q| {
            let cov = q
                .covariance
                .map(|c| world_position_covariance(&q.pose, &c))
                .unwrap_or_else(Matrix3::zeros);
            Ok(Fig3Row {
                time: q.time,
                position: q.pose.world_position(),
                velocity: q.velocity,
                velocity_left: q.velocity_left,
                sigma3: cov.diagonal().map(|v| 3.0 * v.max(0.0).sqrt()),
            })
        })
        .collect()
}

/// Node times: the arc boundaries for the velocity variant, the start and
/// the measurement time for the smooth acceleration variant.
pub fn node_times(variant: Variant) -> Vec<f64> {
    match variant {
        Variant::Velocity => (0..=ARC_YAW_RATES.len()).map(|i| i as f64).collect(),
        Variant::Acceleration => vec![0.0, DURATION],
    }
}

/// Runs one variant: a prior-only solve and a solve with the terminal
/// position measurement, both with the start node fixed.
pub fn reproduce_fig3(variant: Variant) -> Result<Fig3Result> {
    let profile = inputs(variant)?;
    let hyper = PriorHyper::isotropic(QC, QC)?;
    let times = node_times(variant);
    let count = times.len() - 1;
    let per_node = profile.segments().len() / count;
    let profiles = profile
        .segments()
        .chunks(per_node)
        .map(|c| InputProfile::new(c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let mut nodes = vec![StateNode::new(0.0, Pose::identity(), Twist::zeros())];
    let blocks = precompute_intervals(&times, &profiles, &hyper)?;
    for (k, block) in blocks.iter().enumerate() {
        let prev = nodes[k];
        let (pose, bias) = block
            .prior_mean_local(&prev.bias, times[k + 1])?
            .to_global(&prev.pose)?;
        nodes.push(StateNode::new(times[k + 1], pose, bias));
    }
    let end_pose = nodes[count].pose;
    let mut prior_problem = Problem::with_intervals(nodes, blocks)?;
    prior_problem.anchor = Anchor::Node;
    let prior = solve(&prior_problem)?;

    let measurement = end_pose.world_position() + Vector3::from(MEASUREMENT_OFFSET);
    let mut post_problem = prior_problem.clone();
    post_problem.add(MeasurementFactor::at_node(
        count,
        Measurement::Position {
            measured: measurement,
            covariance: Matrix3::identity() * MEASUREMENT_SIGMA.powi(2),
        },
    ));
    let posterior = solve(&post_problem)?;

    let n = (DURATION * OUTPUT_RATE).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| DURATION * i as f64 / n as f64).collect();
    Ok(Fig3Result {
        variant,
        prior: sample(&prior, &times)?,
        posterior: sample(&posterior, &times)?,
        measurement,
        measurement_sigma: MEASUREMENT_SIGMA,
        posterior_solution: posterior,
    })
}
