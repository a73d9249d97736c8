//! Quasi-static shape estimation of tendon-driven continuum robots.
//!
//! Arclength plays the role of time and strain the role of velocity. Poses
//! follow the library convention (`T_bw`), so the model variable
//! `bias + v_in` equals the negated physical body strain.

use nalgebra::{Matrix3, Matrix6, Vector3};

use crate::error::{Error, Result};
use crate::factors::{Measurement, StateNode};
use crate::inputs::{InputProfile, InputSegment};
use crate::liegroup::{angular, linear, nearest_rotation, skew, twist, Matrix12, Pose, Twist};
use crate::prior::PriorHyper;
use crate::solver::{
    precompute_intervals, solve, Anchor, MeasurementFactor, Problem, Solution, SolverSettings,
};

/// Number of input segments per rod length; sets the width of the moment bumps.
pub const INPUT_SEGMENTS_PER_LENGTH: usize = 50;

/// Elastic rod backbone.
#[derive(Clone, Debug, PartialEq)]
pub struct RodModel {
    /// Length in m.
    pub length: f64,
    /// Diagonal of the stiffness matrix: shear/stretch (N) then bending and
    /// torsion (N m^2).
    pub stiffness: Twist,
    /// Arclengths (m) of the disks used as comparison points.
    pub disk_arclengths: Vec<f64>,
}

impl RodModel {
    pub fn new(length: f64, stiffness: Twist, disk_arclengths: Vec<f64>) -> Result<Self> {
        let rod = Self {
            length,
            stiffness,
            disk_arclengths,
        };
        rod.validate()?;
        Ok(rod)
    }

    /// A round superelastic backbone of the given diameter (m), Young's
    /// modulus (Pa) and Poisson ratio.
    pub fn round(length: f64, diameter: f64, young: f64, poisson: f64, disks: usize) -> Result<Self> {
        let area = std::f64::consts::PI * diameter.powi(2) / 4.0;
        let inertia = std::f64::consts::PI * diameter.powi(4) / 64.0;
        let shear = young / (2.0 * (1.0 + poisson));
        let stiffness = Twist::new(
            shear * area,
            shear * area,
            young * area,
            young * inertia,
            young * inertia,
            shear * 2.0 * inertia,
        );
        let disks = (1..=disks)
            .map(|i| length * i as f64 / disks as f64)
            .collect();
        Self::new(length, stiffness, disks)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::Geometry(format!(
                "rod length must be positive, got {}",
                self.length
            )));
        }
        if self.stiffness.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Geometry(format!(
                "stiffness entries must be positive, got {:?}",
                self.stiffness.as_slice()
            )));
        }
        if let Some(s) = self
            .disk_arclengths
            .iter()
            .find(|s| !(**s >= 0.0 && **s <= self.length))
        {
            return Err(Error::Geometry(format!(
                "disk arclength {s} lies outside [0, {}]",
                self.length
            )));
        }
        Ok(())
    }

    /// Width of a moment bump: one input segment.
    pub fn bump_width(&self) -> f64 {
        self.length / INPUT_SEGMENTS_PER_LENGTH as f64
    }

    /// `K^-1 f` for a load `f = [force; moment]`.
    pub fn compliance(&self, load: &Twist) -> Twist {
        load.component_div(&self.stiffness)
    }

    /// Uniform node arclengths from base to tip.
    pub fn node_arclengths(&self, count: usize) -> Result<Vec<f64>> {
        if count < 2 {
            return Err(Error::Config(format!("need at least 2 nodes, got {count}")));
        }
        Ok((0..count)
            .map(|i| {
                if i + 1 == count {
                    self.length
                } else {
                    self.length * i as f64 / (count - 1) as f64
                }
            })
            .collect())
    }
}

/// A tendon running parallel to the backbone and terminated at one disk.
#[derive(Clone, Debug, PartialEq)]
pub struct TendonRoute {
    /// Distance from the backbone in m.
    pub offset_radius: f64,
    /// Angle of the routing plane around the backbone, from the body x axis.
    pub azimuth: f64,
    pub termination_arclength: f64,
    /// Tension in N.
    pub tension: f64,
}

impl TendonRoute {
    pub fn validate(&self, rod: &RodModel) -> Result<()> {
        if !(self.termination_arclength > 0.0 && self.termination_arclength <= rod.length) {
            return Err(Error::Geometry(format!(
                "tendon terminates at {} outside (0, {}]",
                self.termination_arclength, rod.length
            )));
        }
        if !(self.tension >= 0.0) {
            return Err(Error::Geometry(format!(
                "tendon tension must be non-negative, got {}",
                self.tension
            )));
        }
        if !(self.offset_radius >= 0.0) {
            return Err(Error::Geometry(format!(
                "tendon offset must be non-negative, got {}",
                self.offset_radius
            )));
        }
        Ok(())
    }

    /// Body-frame point moment (N m) at the termination: the lever arm
    /// crossed with the tension pulling back along the backbone.
    pub fn point_moment(&self) -> Vector3<f64> {
        let r = Vector3::new(self.azimuth.cos(), self.azimuth.sin(), 0.0) * self.offset_radius;
        r.cross(&Vector3::new(0.0, 0.0, -self.tension))
    }
}

/// Internal body-frame moment carried at `s` by the tendons.
pub fn tendon_moment(tendons: &[TendonRoute], s: f64) -> Vector3<f64> {
    tendons
        .iter()
        .filter(|t| s < t.termination_arclength)
        .map(TendonRoute::point_moment)
        .sum()
}

/// One triangular moment bump.
#[derive(Clone, Copy, Debug)]
struct Bump {
    center: f64,
    half_width: f64,
    /// `K^-1` times the point moment, as a model acceleration.
    weight: Twist,
}

impl Bump {
    fn value(&self, s: f64) -> Twist {
        let x = 1.0 - (s - self.center).abs() / self.half_width;
        if x <= 0.0 {
            Twist::zeros()
        } else {
            self.weight * (x / self.half_width)
        }
    }
}

fn bumps(rod: &RodModel, tendons: &[TendonRoute]) -> Result<Vec<Bump>> {
    let w = rod.bump_width();
    let mut out = Vec::new();
    for t in tendons {
        t.validate(rod)?;
        if t.tension == 0.0 {
            continue;
        }
        let load = twist(Vector3::zeros(), t.point_moment());
        out.push(Bump {
            center: t.termination_arclength.clamp(0.5 * w, rod.length - 0.5 * w),
            half_width: 0.5 * w,
            weight: rod.compliance(&load),
        });
    }
    Ok(out)
}

/// Converts tendon tensions into one input profile per node interval.
///
/// Each tendon's point moment becomes a triangular bump one input segment
/// wide whose integral equals the moment; the bump is mapped through the
/// compliance onto the acceleration channel. The velocity channel carries
/// `-strain_input`.
pub fn tensions_to_inputs(
    rod: &RodModel,
    tendons: &[TendonRoute],
    node_arclengths: &[f64],
) -> Result<Vec<InputProfile>> {
    tensions_to_inputs_with_strain(rod, tendons, node_arclengths, &Twist::zeros())
}

/// [`tensions_to_inputs`] with a constant strain input.
pub fn tensions_to_inputs_with_strain(
    rod: &RodModel,
    tendons: &[TendonRoute],
    node_arclengths: &[f64],
    strain_input: &Twist,
) -> Result<Vec<InputProfile>> {
    rod.validate()?;
    let (first, last) = match (node_arclengths.first(), node_arclengths.last()) {
        (Some(a), Some(b)) if node_arclengths.len() >= 2 => (*a, *b),
        _ => {
            return Err(Error::Coverage {
                start: 0.0,
                end: rod.length,
            })
        }
    };
    if first.abs() > 1e-12 || (last - rod.length).abs() > 1e-12 {
        return Err(Error::Coverage {
            start: 0.0,
            end: rod.length,
        });
    }
    let bumps = bumps(rod, tendons)?;
    let v = -strain_input;
    let accel = |s: f64| bumps.iter().map(|b| b.value(s)).sum::<Twist>();
    let mut knots: Vec<f64> = bumps
        .iter()
        .flat_map(|b| [b.center - b.half_width, b.center, b.center + b.half_width])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    node_arclengths
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                return Err(Error::Wiring("node arclengths must be strictly increasing".into()));
            }
            let mut cuts = vec![a];
            cuts.extend(knots.iter().copied().filter(|k| *k > a + 1e-12 && *k < b - 1e-12));
            cuts.push(b);
            let segments = cuts
                .windows(2)
                .map(|c| InputSegment::new(v, v, accel(c[0]), accel(c[1]), c[1] - c[0]))
                .collect::<Result<Vec<_>>>()?;
            InputProfile::new(segments)
        })
        .collect()
}

/// Integrated moment of the bump profiles over `[0, length]`, in N m.
pub fn integrated_moment(rod: &RodModel, profiles: &[InputProfile]) -> Vector3<f64> {
    let mut acc = Twist::zeros();
    for p in profiles {
        for seg in p.segments() {
            acc += (seg.acceleration_at(0.0) + seg.acceleration_at(seg.duration)) * (0.5 * seg.duration);
        }
    }
    angular(&acc.component_mul(&rod.stiffness))
}

/// Physical strain of the unloaded rod.
pub fn nominal_strain() -> Twist {
    Twist::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
}

/// Measurement at a given arclength.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeMeasurement {
    pub arclength: f64,
    pub measurement: Measurement,
}

impl ShapeMeasurement {
    /// Tip pose (`T_bw` convention) with a 6x6 covariance.
    pub fn tip_pose(rod: &RodModel, measured: Pose, covariance: Matrix6<f64>) -> Self {
        Self {
            arclength: rod.length,
            measurement: Measurement::Pose {
                measured,
                covariance,
            },
        }
    }

    /// Tip position in the base frame.
    pub fn tip_position(rod: &RodModel, measured: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        Self {
            arclength: rod.length,
            measurement: Measurement::Position {
                measured,
                covariance,
            },
        }
    }
}

/// Estimator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeConfig {
    pub hyper: PriorHyper,
    pub node_count: usize,
    /// Use the tendon-derived inputs; otherwise the prior has no inputs.
    pub use_inputs: bool,
    /// Fixed base frame (`T_bw` at `s = 0`).
    pub base: Pose,
    /// Covariance of the base strain around its prior mean.
    pub base_strain_covariance: Matrix6<f64>,
    /// Constant strain input, zero by default.
    pub strain_input: Twist,
    pub settings: SolverSettings,
}

impl ShapeConfig {
    pub fn new(hyper: PriorHyper, node_count: usize, use_inputs: bool) -> Self {
        let settings = SolverSettings {
            parallel: false,
            ..SolverSettings::default()
        };
        Self {
            hyper,
            node_count,
            use_inputs,
            base: Pose::identity(),
            base_strain_covariance: Matrix6::from_diagonal(&Twist::new(
                1e-4, 1e-4, 1e-4, 25.0, 25.0, 25.0,
            )),
            strain_input: Twist::zeros(),
            settings,
        }
    }
}

/// Posterior shape.
#[derive(Clone, Debug)]
pub struct ShapeEstimate {
    pub solution: Solution,
    pub inputs: Vec<InputProfile>,
}

impl ShapeEstimate {
    /// Posterior pose (`T_bw`) at each arclength.
    pub fn poses(&self, arclengths: &[f64]) -> Result<Vec<Pose>> {
        arclengths
            .iter()
            .map(|s| self.solution.query(*s).map(|q| q.pose))
            .collect()
    }

    /// Posterior physical strain at `s`.
    pub fn strain(&self, s: f64) -> Result<Twist> {
        Ok(-self.solution.query(s)?.velocity)
    }
}

/// Prior mean of the base strain: nominal plus, with inputs, the strain the
/// point-moment model predicts at the base.
pub fn base_strain_mean(rod: &RodModel, tendons: &[TendonRoute], use_inputs: bool) -> Twist {
    let mut strain = nominal_strain();
    if use_inputs {
        strain += rod.compliance(&twist(Vector3::zeros(), tendon_moment(tendons, 0.0)));
    }
    strain
}

/// MAP shape estimate with the base pose fixed at `s = 0`.
pub fn estimate_shape(
    rod: &RodModel,
    tendons: &[TendonRoute],
    measurements: &[ShapeMeasurement],
    config: &ShapeConfig,
) -> Result<ShapeEstimate> {
    rod.validate()?;
    for t in tendons {
        t.validate(rod)?;
    }
    if measurements.is_empty() {
        return Err(Error::Config(
            "shape estimation needs at least one measurement".into(),
        ));
    }
    let arcs = rod.node_arclengths(config.node_count)?;
    let active: &[TendonRoute] = if config.use_inputs { tendons } else { &[] };
    let inputs = tensions_to_inputs_with_strain(rod, active, &arcs, &config.strain_input)?;
    let intervals = precompute_intervals(&arcs, &inputs, &config.hyper)?;

    let bias0 = -base_strain_mean(rod, tendons, config.use_inputs) + config.strain_input;
    let mut nodes = Vec::with_capacity(arcs.len());
    nodes.push(StateNode::new(0.0, config.base, bias0));
    for (k, blocks) in intervals.iter().enumerate() {
        let prev = nodes[k];
        let local = blocks.prior_mean_local(&prev.bias, blocks.end())?;
        let (pose, bias) = local.to_global(&prev.pose)?;
        nodes.push(StateNode::new(arcs[k + 1], pose, bias));
    }

    let mut problem = Problem::with_intervals(nodes, intervals)?;
    problem.settings = config.settings.clone();
    problem.anchor = Anchor::Pose;
    let mut cov = Matrix12::zeros();
    cov.fixed_view_mut::<6, 6>(0, 0)
        .copy_from(&Matrix6::identity());
    cov.fixed_view_mut::<6, 6>(6, 6)
        .copy_from(&config.base_strain_covariance);
    problem.add(MeasurementFactor::at_node(
        0,
        Measurement::StatePrior {
            pose: config.base,
            bias: bias0,
            covariance: cov,
        },
    ));
    for m in measurements {
        problem.add(attach(&arcs, m)?);
    }
    let solution = solve(&problem)?;
    Ok(ShapeEstimate { solution, inputs })
}

fn attach(arcs: &[f64], m: &ShapeMeasurement) -> Result<MeasurementFactor> {
    let s = m.arclength;
    let last = arcs[arcs.len() - 1];
    if !(s >= -1e-12 && s <= last + 1e-12) {
        return Err(Error::Domain {
            value: s,
            lower: 0.0,
            upper: last,
        });
    }
    if let Some(i) = arcs.iter().position(|a| (a - s).abs() <= 1e-12) {
        return Ok(MeasurementFactor::at_node(i, m.measurement.clone()));
    }
    let k = arcs.partition_point(|a| *a <= s) - 1;
    Ok(MeasurementFactor::at_time(k, s, m.measurement.clone()))
}

/// Ground-truth rod under tendon point moments and an optional tip force
/// (base-frame, N). Returns `T_bw` poses at the requested arclengths.
///
/// The rod obeys `dT_wb/ds = T_wb eps^` with
/// `eps = [e_z + K_n^-1 n; K_m^-1 m]`, where the internal force `n` and
/// moment `m` come from the tip force and the tendons. The tip-force lever arm
/// depends on the unknown tip position, found by fixed-point iteration.
#[derive(Clone, Debug)]
pub struct RodSimulator {
    pub rod: RodModel,
    pub tendons: Vec<TendonRoute>,
    pub tip_force: Vector3<f64>,
    pub base: Pose,
    /// RK4 step in m.
    pub step: f64,
}

impl RodSimulator {
    pub fn new(rod: RodModel, tendons: Vec<TendonRoute>, tip_force: Vector3<f64>) -> Self {
        Self {
            rod,
            tendons,
            tip_force,
            base: Pose::identity(),
            step: 1e-4,
        }
    }

    fn strain(&self, r: &Matrix3<f64>, p: &Vector3<f64>, tip: &Vector3<f64>, s: f64) -> Twist {
        let n = r.transpose() * self.tip_force;
        let m = tendon_moment(&self.tendons, s) + r.transpose() * (tip - p).cross(&self.tip_force);
        let load = twist(n, m);
        let mut e = self.rod.compliance(&load);
        e += nominal_strain();
        e
    }

    fn integrate(&self, arclengths: &[f64], tip: &Vector3<f64>) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
        let mut cuts: Vec<f64> = vec![0.0, self.rod.length];
        cuts.extend(self.tendons.iter().map(|t| t.termination_arclength));
        cuts.extend(arclengths.iter().copied());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let base = self.base.inverse();
        let mut r = *base.rotation();
        let mut p = *base.translation();
        let mut at = vec![(Matrix3::zeros(), Vector3::zeros()); arclengths.len()];
        let mut record = |s: f64, r: &Matrix3<f64>, p: &Vector3<f64>| {
            for (i, a) in arclengths.iter().enumerate() {
                if (a - s).abs() < 1e-14 {
                    at[i] = (*r, *p);
                }
            }
        };
        record(0.0, &r, &p);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let n = ((b - a) / self.step).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            let f = |r: &Matrix3<f64>, p: &Vector3<f64>| {
                let e = self.strain(r, p, tip, mid);
                (r * skew(&angular(&e)), r * linear(&e))
            };
            for _ in 0..n {
                let (kr1, kp1) = f(&r, &p);
                let (kr2, kp2) = f(&(r + kr1 * (0.5 * h)), &(p + kp1 * (0.5 * h)));
                let (kr3, kp3) = f(&(r + kr2 * (0.5 * h)), &(p + kp2 * (0.5 * h)));
                let (kr4, kp4) = f(&(r + kr3 * h), &(p + kp3 * h));
                r += (kr1 + kr2 * 2.0 + kr3 * 2.0 + kr4) * (h / 6.0);
                p += (kp1 + kp2 * 2.0 + kp3 * 2.0 + kp4) * (h / 6.0);
            }
            record(b, &r, &p);
        }
        at
    }

    /// Simulated `T_bw` poses at `arclengths` (each within `[0, length]`).
    pub fn poses(&self, arclengths: &[f64]) -> Result<Vec<Pose>> {
        self.rod.validate()?;
        for t in &self.tendons {
            t.validate(&self.rod)?;
        }
        if let Some(s) = arclengths
            .iter()
            .find(|s| !(**s >= 0.0 && **s <= self.rod.length))
        {
            return Err(Error::Domain {
                value: *s,
                lower: 0.0,
                upper: self.rod.length,
            });
        }
        let mut query = arclengths.to_vec();
        query.push(self.rod.length);
        let mut tip = self.base.inverse().transform_point(&Vector3::new(0.0, 0.0, self.rod.length));
        let mut states = self.integrate(&query, &tip);
        for _ in 0..200 {
            let new_tip = states[states.len() - 1].1;
            let change = (new_tip - tip).norm();
            tip = new_tip;
            states = self.integrate(&query, &tip);
            if change < 1e-13 {
                break;
            }
        }
        if (states[states.len() - 1].1 - tip).norm() > 1e-9 {
            return Err(Error::Numerical(
                "tip-force fixed point did not converge".into(),
            ));
        }
        Ok(states[..arclengths.len()]
            .iter()
            .map(|(r, p)| Pose::from_world(nearest_rotation(r), *p))
            .collect())
    }
}

/// Position RMSE and maximum (m) between two pose lists.
pub fn position_errors(estimate: &[Pose], truth: &[Pose]) -> (f64, f64) {
    let errs: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a.world_position() - b.world_position()).norm())
        .collect();
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len().max(1) as f64).sqrt();
    (rmse, errs.iter().copied().fold(0.0, f64::max))
}
