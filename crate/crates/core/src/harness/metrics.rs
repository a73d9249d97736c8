//! Error statistics against ground truth.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::Serialize;

use crate::liegroup::{Matrix12, Pose};

/// Accuracy and cost of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub position_rmse: f64,
    pub position_max: f64,
    pub rotation_rmse: f64,
    pub rotation_max: f64,
    pub solve_time: f64,
    pub iterations: usize,
}

/// Angle (rad) of `R_gt R_est^T`.
pub fn rotation_error(truth: &Pose, estimate: &Pose) -> f64 {
    let r = truth.world_rotation() * estimate.world_rotation().transpose();
    Rotation3::from_matrix_unchecked(r).angle()
}

pub fn position_error(truth: &Pose, estimate: &Pose) -> f64 {
    (truth.world_position() - estimate.world_position()).norm()
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

/// Position and rotation statistics over paired pose lists.
pub fn pose_metrics(truth: &[Pose], estimate: &[Pose]) -> Metrics {
    let p: Vec<f64> = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| position_error(a, b))
        .collect();
    let r: Vec<f64> = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| rotation_error(a, b))
        .collect();
    Metrics {
        position_rmse: rms(&p),
        position_max: max(&p),
        rotation_rmse: rms(&r),
        rotation_max: max(&r),
        ..Metrics::default()
    }
}

/// World-frame position covariance from a perturbation covariance. The
/// world position `-R^T t` moves by `-R^T rho` under a left perturbation.
pub fn world_position_covariance(pose: &Pose, covariance: &Matrix12) -> Matrix3<f64> {
    let rt = pose.rotation().transpose();
    rt * covariance.fixed_view::<3, 3>(0, 0) * rt.transpose()
}

/// Normalized estimation error squared of the planar pose components
/// (x, y, yaw of the left perturbation taking the estimate to the truth).
pub fn planar_nees(truth: &Pose, estimate: &Pose, covariance: &Matrix12) -> Option<f64> {
    let delta = crate::liegroup::log_map(&(*truth * estimate.inverse())).ok()?;
    let idx = [0usize, 1, 5];
    let e = Vector3::new(delta[idx[0]], delta[idx[1]], delta[idx[2]]);
    let p = Matrix3::from_fn(|r, c| covariance[(idx[r], idx[c])]);
    let chol = p.cholesky()?;
    Some(e.dot(&chol.solve(&e)))
}
