//! Continuum-robot runs: simulate each load case, measure the tip, estimate
//! the shape with and without the tendon inputs.

use std::time::Instant;

use nalgebra::{Matrix3, Matrix6, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuum::{estimate_shape, RodSimulator, ShapeConfig, ShapeMeasurement};
use crate::error::Result;
use crate::harness::config::{tip_force, ContinuumConfig, TipSensor};
use crate::harness::metrics::{pose_metrics, Metrics};
use crate::liegroup::{exp_map, Pose, Twist};

/// One estimate of one load case.
#[derive(Clone, Debug)]
pub struct ShapeRun {
    pub case: usize,
    pub with_inputs: bool,
    pub metrics: Metrics,
    pub arclengths: Vec<f64>,
    pub truth: Vec<Pose>,
    pub estimate: Vec<Pose>,
}

/// One row of the continuum metrics file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeRow {
    pub case: usize,
    pub method: String,
    pub sensor: String,
    pub position_rmse: f64,
    pub position_max: f64,
    pub rotation_rmse: f64,
    pub rotation_max: f64,
    pub solve_time: f64,
    pub iterations: usize,
}

impl ShapeRun {
    pub fn row(&self, sensor: TipSensor) -> ShapeRow {
        ShapeRow {
            case: self.case,
            method: if self.with_inputs { "inputs" } else { "no-inputs" }.into(),
            sensor: match sensor {
                TipSensor::Pose => "pose",
                TipSensor::Position => "position",
            }
            .into(),
            position_rmse: self.metrics.position_rmse,
            position_max: self.metrics.position_max,
            rotation_rmse: self.metrics.rotation_rmse,
            rotation_max: self.metrics.rotation_max,
            solve_time: self.metrics.solve_time,
            iterations: self.metrics.iterations,
        }
    }
}

/// Simulates and estimates every load case, both with and without inputs.
/// Measurement noise for case `i` is drawn from `seed + i`.
pub fn run_continuum(cfg: &ContinuumConfig, seed: u64) -> Result<Vec<ShapeRun>> {
    cfg.validate()?;
    let rod = cfg.rod()?;
    let hyper = cfg.hyper()?;
    let mut arcs = vec![0.0];
    arcs.extend(rod.disk_arclengths.iter().copied());
    let r = Twist::from_column_slice(&cfg.r_pose);

    let per_case = (0..cfg.cases.len())
        .into_par_iter()
        .map(|case| -> Result<Vec<ShapeRun>> {
            let tendons = cfg.tendons(case)?;
            let sim = RodSimulator::new(rod.clone(), tendons.clone(), tip_force(&cfg.cases[case]));
            let truth = sim.poses(&arcs)?;
            let tip = truth[truth.len() - 1];

            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(case as u64));
            let mut noise = Twist::zeros();
            if cfg.noisy {
                for i in 0..6 {
                    let z: f64 = rng.sample(StandardNormal);
                    noise[i] = r[i].sqrt() * z;
                }
            }
            let meas = match cfg.sensor {
                TipSensor::Pose => ShapeMeasurement::tip_pose(
                    &rod,
                    exp_map(&noise) * tip,
                    Matrix6::from_diagonal(&r),
                ),
                TipSensor::Position => ShapeMeasurement::tip_position(
                    &rod,
                    tip.world_position() + Vector3::new(noise[0], noise[1], noise[2]),
                    Matrix3::from_diagonal(&r.fixed_rows::<3>(0).into_owned()),
                ),
            };
            [true, false]
                .into_iter()
                .map(|with_inputs| {
                    let config = ShapeConfig::new(hyper.clone(), cfg.node_count, with_inputs);
                    let start = Instant::now();
                    let est = estimate_shape(&rod, &tendons, std::slice::from_ref(&meas), &config)?;
                    let solve_time = start.elapsed().as_secs_f64();
                    let estimate = est.poses(&arcs)?;
                    let mut metrics = pose_metrics(&truth, &estimate);
                    metrics.solve_time = solve_time;
                    metrics.iterations = est.solution.iterations;
                    Ok(ShapeRun {
                        case,
                        with_inputs,
                        metrics,
                        arclengths: arcs.clone(),
                        truth: truth.clone(),
                        estimate,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_case.into_iter().flatten().collect())
}
