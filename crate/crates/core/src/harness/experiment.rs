//! Mobile-robot localization runs: problem construction, solve, evaluation.

use std::time::Instant;

use nalgebra::{Matrix6, Rotation3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factors::{Measurement, StateNode};
use crate::harness::config::{Method, MobileConfig, NodePolicy};
use crate::harness::metrics::{planar_nees, pose_metrics, Metrics};
use crate::harness::simulate::{dead_reckoning, grid_times, simulate_mobile, MobileDataset};
use crate::inputs::InputProfile;
use crate::liegroup::{Matrix12, Pose, Twist};
use crate::solver::{precompute_intervals, solve, MeasurementFactor, Problem, Solution};
use crate::PLANAR_LOCK_INFORMATION;

/// Variance of the weak prior on the first node's bias.
const INITIAL_BIAS_VARIANCE: f64 = 1.0;
/// Node and measurement times closer than this coincide.
const TIME_EPS: f64 = 1e-9;

/// One row of `trajectory.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub truth: Pose,
    pub estimate: Pose,
    pub velocity: Twist,
    pub covariance_diagonal: [f64; 12],
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: String,
    pub nodes: String,
    pub dt_landmark: f64,
    pub seed: u64,
    pub node_count: usize,
    pub interpolated_evaluations: usize,
    pub position_rmse: f64,
    pub position_max: f64,
    pub rotation_rmse: f64,
    pub rotation_max: f64,
    pub solve_time: f64,
    pub iterations: usize,
    pub nees: f64,
}

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunResult {
    pub metrics: Metrics,
    pub trajectory: Vec<TrajectoryRow>,
    pub node_times: Vec<f64>,
    /// Evaluation times that fall strictly between nodes.
    pub interpolated_evaluations: usize,
    /// Mean planar NEES over the evaluation times.
    pub nees: f64,
    pub solution: Solution,
}

impl RunResult {
    pub fn row(&self, method: Method, policy: NodePolicy, dt_landmark: f64, seed: u64) -> MetricsRow {
        MetricsRow {
            method: method.to_string(),
            nodes: policy.to_string(),
            dt_landmark,
            seed,
            node_count: self.node_times.len(),
            interpolated_evaluations: self.interpolated_evaluations,
            position_rmse: self.metrics.position_rmse,
            position_max: self.metrics.position_max,
            rotation_rmse: self.metrics.rotation_rmse,
            rotation_max: self.metrics.rotation_max,
            solve_time: self.metrics.solve_time,
            iterations: self.metrics.iterations,
            nees: self.nees,
        }
    }
}

fn merge_times(mut t: Vec<f64>) -> Vec<f64> {
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() < TIME_EPS);
    t
}

/// Node times under a policy.
pub fn node_times(data: &MobileDataset, policy: NodePolicy) -> Vec<f64> {
    let end = data.truth.duration();
    match policy {
        NodePolicy::EveryInputTick => data.odometry.iter().map(|o| o.time).collect(),
        NodePolicy::MeasurementTimesOnly => {
            let mut t = data.range_times();
            t.push(0.0);
            t.push(end);
            merge_times(t)
        }
    }
}

/// Index of the node at `t`, or of the interval containing it.
fn attachment(nodes: &[f64], t: f64) -> (usize, bool) {
    let i = nodes.partition_point(|n| *n < t - TIME_EPS);
    if i < nodes.len() && (nodes[i] - t).abs() < TIME_EPS {
        (i, true)
    } else {
        (i.saturating_sub(1).min(nodes.len() - 2), false)
    }
}

fn attach(nodes: &[f64], t: f64, m: Measurement) -> MeasurementFactor {
    match attachment(nodes, t) {
        (i, true) => MeasurementFactor::at_node(i, m),
        (k, false) => MeasurementFactor::at_time(k, t, m),
    }
}

/// Per-interval input profiles from the odometry log.
pub fn odometry_profiles(data: &MobileDataset, nodes: &[f64]) -> Result<Vec<InputProfile>> {
    let times: Vec<f64> = data.odometry.iter().map(|o| o.time).collect();
    let v: Vec<Twist> = data.odometry.iter().map(|o| o.velocity()).collect();
    let a = vec![Twist::zeros(); v.len()];
    nodes
        .par_windows(2)
        .map(|w| {
            let lo = times.partition_point(|t| *t <= w[0] + TIME_EPS).saturating_sub(1);
            let hi = (times.partition_point(|t| *t < w[1] - TIME_EPS) + 1).min(times.len());
            let lo = lo.min(hi.saturating_sub(2));
            InputProfile::from_samples_with_max(
                &times[lo..hi],
                &v[lo..hi],
                &a[lo..hi],
                (w[0], w[1]),
                crate::inputs::DEFAULT_MAX_SEGMENT,
            )
        })
        .collect()
}

fn odometry_at(data: &MobileDataset, t: f64) -> Twist {
    let i = data
        .odometry
        .partition_point(|o| o.time <= t + TIME_EPS)
        .saturating_sub(1);
    data.odometry[i].velocity()
}

/// Builds the batch problem for a method and node policy.
pub fn build_problem(
    cfg: &MobileConfig,
    data: &MobileDataset,
    method: Method,
    policy: NodePolicy,
) -> Result<Problem> {
    let times = node_times(data, policy);
    if times.len() < 2 {
        return Err(Error::Config("run needs at least 2 nodes".into()));
    }
    let hyper = cfg.hyper(method)?;
    let profiles = match method {
        Method::Inputs => odometry_profiles(data, &times)?,
        Method::Wnoa => times
            .windows(2)
            .map(|w| InputProfile::zero(w[1] - w[0]))
            .collect::<Result<_>>()?,
    };
    let intervals = precompute_intervals(&times, &profiles, &hyper)?;

    let guess = dead_reckoning(data, &times);
    let nodes: Vec<StateNode> = times
        .iter()
        .zip(&guess)
        .map(|(t, p)| {
            let bias = match method {
                Method::Inputs => Twist::zeros(),
                Method::Wnoa => odometry_at(data, *t),
            };
            StateNode::new(*t, *p, bias)
        })
        .collect();
    let bias0 = nodes[0].bias;
    let mut problem = Problem::with_intervals(nodes, intervals)?;

    let [st, sr] = cfg.initial_sigma;
    let mut cov = Matrix12::zeros();
    for i in 0..3 {
        cov[(i, i)] = st * st;
        cov[(i + 3, i + 3)] = sr * sr;
    }
    for i in 6..12 {
        cov[(i, i)] = INITIAL_BIAS_VARIANCE;
    }
    problem.add(MeasurementFactor::at_node(
        0,
        Measurement::StatePrior {
            pose: data.initial_pose,
            bias: bias0,
            covariance: cov,
        },
    ));
    for i in 0..times.len() {
        problem.add(MeasurementFactor::at_node(
            i,
            Measurement::PlanarLock {
                information: PLANAR_LOCK_INFORMATION,
                lateral: true,
            },
        ));
    }
    for r in &data.ranges {
        problem.add(attach(
            &times,
            r.time,
            Measurement::Range {
                landmark: data.landmarks[r.landmark],
                range: r.range,
                variance: cfg.range_variance,
            },
        ));
    }
    if method == Method::Wnoa {
        let mut vel_cov = Matrix6::identity();
        vel_cov[(0, 0)] = cfg.velocity_variance[0];
        vel_cov[(5, 5)] = cfg.velocity_variance[1];
        for o in &data.odometry {
            problem.add(attach(
                &times,
                o.time,
                Measurement::Velocity {
                    measured: o.velocity(),
                    covariance: vel_cov,
                    mask: [true, false, false, false, false, true],
                },
            ));
        }
    }
    Ok(problem)
}

/// Solves one run and evaluates it against the truth at the evaluation rate.
pub fn run_experiment(
    cfg: &MobileConfig,
    data: &MobileDataset,
    method: Method,
    policy: NodePolicy,
) -> Result<RunResult> {
    let problem = build_problem(cfg, data, method, policy)?;
    let start = Instant::now();
    let solution = solve(&problem)?;
    let solve_time = start.elapsed().as_secs_f64();

    let node_times: Vec<f64> = problem.nodes.iter().map(|n| n.time).collect();
    let eval = grid_times(1.0 / cfg.eval_rate, data.truth.duration());
    let interpolated_evaluations = eval
        .iter()
        .filter(|t| !attachment(&node_times, **t).1)
        .count();
    let queries = solution.query_many(&eval)?;
    let truth = eval
        .iter()
        .map(|t| data.truth.pose_at(*t))
        .collect::<Result<Vec<_>>>()?;
    let estimate: Vec<Pose> = queries.iter().map(|q| q.pose).collect();
    let mut metrics = pose_metrics(&truth, &estimate);
    metrics.solve_time = solve_time;
    metrics.iterations = solution.iterations;

    let mut nees = Vec::with_capacity(eval.len());
    let trajectory = queries
        .iter()
        .zip(&truth)
        .map(|(q, gt)| {
            let cov = q.covariance.unwrap_or_else(Matrix12::zeros);
            if let Some(v) = planar_nees(gt, &q.pose, &cov) {
                nees.push(v);
            }
            let mut diag = [0.0; 12];
            for (i, d) in diag.iter_mut().enumerate() {
                *d = cov[(i, i)];
            }
            TrajectoryRow {
                time: q.time,
                truth: *gt,
                estimate: q.pose,
                velocity: q.velocity,
                covariance_diagonal: diag,
            }
        })
        .collect();
    let nees = if nees.is_empty() {
        f64::NAN
    } else {
        nees.iter().sum::<f64>() / nees.len() as f64
    };
    Ok(RunResult {
        metrics,
        trajectory,
        node_times,
        interpolated_evaluations,
        nees,
        solution,
    })
}

/// Simulates with the configured landmark period and runs both the
/// configured method and policy.
pub fn simulate_and_run(cfg: &MobileConfig, seed: u64) -> Result<(MobileDataset, RunResult)> {
    let data = simulate_mobile(cfg, seed)?;
    let result = run_experiment(cfg, &data, cfg.method, cfg.node_policy)?;
    Ok((data, result))
}

/// One metrics row per landmark period and method. Runs execute in
/// parallel; each setting is simulated from the same seed.
pub fn sweep(
    cfg: &MobileConfig,
    seed: u64,
    dt_landmarks: &[f64],
    methods: &[Method],
    policy: NodePolicy,
) -> Result<Vec<MetricsRow>> {
    let jobs: Vec<(f64, Method)> = dt_landmarks
        .iter()
        .flat_map(|dt| methods.iter().map(move |m| (*dt, *m)))
        .collect();
    jobs.par_iter()
        .map(|(dt, method)| {
            let mut c = cfg.clone();
            c.dt_landmark = *dt;
            let data = simulate_mobile(&c, seed)?;
            let res = run_experiment(&c, &data, *method, policy)?;
            Ok(res.row(*method, policy, *dt, seed))
        })
        .collect()
}

/// Landmark periods of the node-sparsity sweep.
pub const SWEEP_DT_LANDMARK: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// World position and rotation vector of a pose.
pub fn pose_columns(p: &Pose) -> [f64; 6] {
    let x = p.world_position();
    let r: Vector3<f64> = Rotation3::from_matrix_unchecked(p.world_rotation()).scaled_axis();
    [x[0], x[1], x[2], r[0], r[1], r[2]]
}
