//! Ground-truth simulation of a planar mobile robot and its sensor logs.

use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::config::{Method, MobileConfig};
use crate::inputs::InputLog;
use crate::liegroup::{exp_map, wedge, Pose, Twist};

/// Integration step of the ground truth.
pub const TRUTH_STEP: f64 = 1e-4;
/// Spacing of the stored ground-truth grid.
pub const TRUTH_GRID: f64 = 0.01;

/// Model-convention velocity (`T' = varpi^ T`) of a planar body moving
/// forward at `forward` m/s and turning at `yaw_rate` rad/s.
pub fn planar_velocity(forward: f64, yaw_rate: f64) -> Twist {
    Twist::new(-forward, 0.0, 0.0, 0.0, 0.0, -yaw_rate)
}

/// Pose (`T_bw`) of a planar body at `(x, y)` with heading `yaw`.
pub fn planar_pose(x: f64, y: f64, yaw: f64) -> Pose {
    let r = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).into_inner();
    Pose::from_world(r, Vector3::new(x, y, 0.0))
}

/// Ground truth on a regular grid; off-grid poses are integrated from the
/// preceding grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub times: Vec<f64>,
    pub poses: Vec<Pose>,
    /// Velocity bias relative to the script, constant between grid points.
    pub biases: Vec<Twist>,
    script: Vec<(f64, crate::harness::config::ScriptSegment)>,
}

impl GroundTruth {
    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Scripted (commanded) velocity at `t`, right-continuous.
    pub fn commanded(&self, t: f64) -> Twist {
        let idx = self
            .script
            .partition_point(|(start, _)| *start <= t)
            .saturating_sub(1);
        let (start, seg) = &self.script[idx];
        let (f, w) = seg.evaluate(t - start);
        planar_velocity(f, w)
    }

    fn grid_index(&self, t: f64) -> usize {
        let i = (t / TRUTH_GRID).floor() as usize;
        i.min(self.times.len() - 1)
    }

    /// Actual velocity at `t`.
    pub fn velocity(&self, t: f64) -> Twist {
        self.commanded(t) + self.biases[self.grid_index(t)]
    }

    /// Pose at any `t` in `[0, duration]`.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        let end = self.duration();
        if !(t >= -1e-9 && t <= end + 1e-9) {
            return Err(Error::Domain {
                value: t,
                lower: 0.0,
                upper: end,
            });
        }
        let t = t.clamp(0.0, end);
        let i = self.grid_index(t);
        let t0 = self.times[i];
        if (t - t0).abs() < 1e-12 {
            return Ok(self.poses[i]);
        }
        Ok(self.integrate(self.poses[i], t0, t, &self.biases[i]))
    }

    fn integrate(&self, pose: Pose, t0: f64, t1: f64, bias: &Twist) -> Pose {
        let mut cuts = vec![t0];
        cuts.extend(
            self.script
                .iter()
                .map(|(s, _)| *s)
                .filter(|s| *s > t0 + 1e-12 && *s < t1 - 1e-12),
        );
        cuts.push(t1);
        let mut m = pose.matrix();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = ((b - a) / TRUTH_STEP).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            // Velocity from inside the piece so knots are approached correctly.
            let idx = self
                .script
                .partition_point(|(start, _)| *start <= 0.5 * (a + b))
                .saturating_sub(1);
            let (start, seg) = &self.script[idx];
            let f = |t: f64, m: &Matrix4<f64>| {
                let (fw, yaw) = seg.evaluate(t - start);
                wedge(&(planar_velocity(fw, yaw) + bias)) * m
            };
            for k in 0..n {
                let t = a + k as f64 * h;
                let k1 = f(t, &m);
                let k2 = f(t + 0.5 * h, &(m + k1 * (0.5 * h)));
                let k3 = f(t + 0.5 * h, &(m + k2 * (0.5 * h)));
                let k4 = f(t + h, &(m + k3 * h));
                m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        Pose::from_matrix(&m).normalized()
    }
}

/// One range reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeReading {
    pub time: f64,
    pub landmark: usize,
    pub range: f64,
}

/// One odometry reading: forward speed and yaw rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometryReading {
    pub time: f64,
    pub forward: f64,
    pub yaw_rate: f64,
}

impl OdometryReading {
    pub fn velocity(&self) -> Twist {
        planar_velocity(self.forward, self.yaw_rate)
    }
}

/// Everything a run needs: truth, landmarks and sensor logs.
#[derive(Clone, Debug, PartialEq)]
pub struct MobileDataset {
    pub truth: GroundTruth,
    pub landmarks: Vec<Vector3<f64>>,
    pub ranges: Vec<RangeReading>,
    pub odometry: Vec<OdometryReading>,
    pub initial_pose: Pose,
}

impl MobileDataset {
    /// Odometry as a model-convention input log (velocity channel only).
    pub fn input_log(&self) -> InputLog {
        let mut log = InputLog::default();
        for o in &self.odometry {
            log.push(o.time, o.velocity(), Twist::zeros());
        }
        log
    }

    /// Distinct range measurement times.
    pub fn range_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.ranges.iter().map(|r| r.time).collect();
        t.dedup();
        t
    }
}

/// Regular sample times `0, dt, 2 dt, ...` up to `end`, with `end` appended
/// when it is not on the grid.
pub fn sample_times(dt: f64, end: f64) -> Vec<f64> {
    let n = (end / dt + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    if end - t[t.len() - 1] > 1e-9 {
        t.push(end);
    } else {
        let last = t.len() - 1;
        t[last] = end;
    }
    t
}

/// Multiples of `dt` inside `[0, end]`.
pub fn grid_times(dt: f64, end: f64) -> Vec<f64> {
    let n = (end / dt + 1e-9).floor() as usize;
    (0..=n).map(|i| (i as f64 * dt).min(end)).collect()
}

/// Simulates the scripted drive and its sensor logs. The bias process noise,
/// when enabled, uses the power-spectral density of `noise_method`.
pub fn simulate_mobile(cfg: &MobileConfig, seed: u64) -> Result<MobileDataset> {
    simulate_mobile_with(cfg, seed, cfg.method)
}

pub fn simulate_mobile_with(cfg: &MobileConfig, seed: u64, noise_method: Method) -> Result<MobileDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let mut script = Vec::with_capacity(cfg.script.len());
    let mut acc = 0.0;
    for s in &cfg.script {
        script.push((acc, s.clone()));
        acc += s.duration;
    }
    let duration = acc;
    let [x0, y0, yaw0] = cfg.initial_pose;
    let initial_pose = planar_pose(x0, y0, yaw0);

    let grid = sample_times(TRUTH_GRID, duration);
    let qc = cfg.hyper(noise_method)?.qc().diagonal();
    let mut truth = GroundTruth {
        times: grid.clone(),
        poses: Vec::with_capacity(grid.len()),
        biases: Vec::with_capacity(grid.len()),
        script,
    };
    let mut pose = initial_pose;
    let mut bias = Twist::zeros();
    for (i, t) in grid.iter().enumerate() {
        if i > 0 {
            let prev = grid[i - 1];
            pose = truth.integrate(pose, prev, *t, &bias);
            if cfg.process_noise {
                let h = t - prev;
                bias[0] += (qc[0] * h).sqrt() * normal();
                bias[5] += (qc[5] * h).sqrt() * normal();
            }
        }
        truth.poses.push(pose);
        truth.biases.push(bias);
    }

    let noise = if cfg.noisy { 1.0 } else { 0.0 };
    let landmarks = cfg.landmark_vectors();
    let mut ranges = Vec::new();
    for t in grid_times(cfg.dt_landmark, duration) {
        let p = truth.pose_at(t)?.world_position();
        for (j, l) in landmarks.iter().enumerate() {
            let r = (p - l).norm() + noise * cfg.range_variance.sqrt() * normal();
            ranges.push(RangeReading {
                time: t,
                landmark: j,
                range: r,
            });
        }
    }

    let odo_noise = if cfg.odometry_noise { noise } else { 0.0 };
    let mut odometry = Vec::new();
    for t in sample_times(1.0 / cfg.input_rate, duration) {
        let v = truth.commanded(t);
        odometry.push(OdometryReading {
            time: t,
            forward: -v[0] + odo_noise * cfg.velocity_variance[0].sqrt() * normal(),
            yaw_rate: -v[5] + odo_noise * cfg.velocity_variance[1].sqrt() * normal(),
        });
    }

    Ok(MobileDataset {
        truth,
        landmarks,
        ranges,
        odometry,
        initial_pose,
    })
}

/// Dead-reckoned poses at `times` from the odometry log, starting at the
/// dataset's initial pose.
pub fn dead_reckoning(data: &MobileDataset, times: &[f64]) -> Vec<Pose> {
    let odo = &data.odometry;
    let mut out = Vec::with_capacity(times.len());
    let mut pose = data.initial_pose;
    let mut t = 0.0;
    let mut i = 0;
    for &target in times {
        while t < target - 1e-12 {
            while i + 1 < odo.len() && odo[i + 1].time <= t + 1e-12 {
                i += 1;
            }
            let next = if i + 1 < odo.len() {
                odo[i + 1].time.min(target)
            } else {
                target
            };
            let h = next - t;
            pose = exp_map(&(odo[i].velocity() * h)) * pose;
            t = next;
        }
        out.push(pose);
    }
    out
}
