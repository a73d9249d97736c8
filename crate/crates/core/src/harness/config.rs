//! Scenario files: TOML with a `schema_version` key and one section per
//! domain.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::continuum::{RodModel, TendonRoute};
use crate::error::{Error, Result};
use crate::liegroup::Twist;
use crate::prior::PriorHyper;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Mobile,
    Continuum,
}

/// Which discrete states enter the batch.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
pub enum NodePolicy {
    /// One node per input sample.
    #[default]
    #[serde(rename = "all")]
    EveryInputTick,
    /// Nodes only where range measurements occur.
    #[serde(rename = "meas-only")]
    MeasurementTimesOnly,
}

impl std::str::FromStr for NodePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::EveryInputTick),
            "meas-only" => Ok(Self::MeasurementTimesOnly),
            _ => Err(Error::Config(format!("unknown node policy '{s}'"))),
        }
    }
}

impl std::fmt::Display for NodePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::EveryInputTick => "all",
            Self::MeasurementTimesOnly => "meas-only",
        })
    }
}

/// How odometry enters the estimator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Odometry as prior inputs.
    #[default]
    Inputs,
    /// Constant-velocity prior with odometry as velocity measurements.
    Wnoa,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inputs" => Ok(Self::Inputs),
            "wnoa" => Ok(Self::Wnoa),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Inputs => "inputs",
            Self::Wnoa => "wnoa",
        })
    }
}

/// One piece of the ground-truth driving script. Forward speed (m/s) and yaw
/// rate (rad/s) are held for `duration` seconds, with optional sinusoidal
/// terms `amplitude * sin(2 pi t / period)` in local time.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    pub duration: f64,
    #[serde(default)]
    pub forward: f64,
    #[serde(default)]
    pub yaw_rate: f64,
    #[serde(default)]
    pub forward_amplitude: f64,
    #[serde(default)]
    pub yaw_amplitude: f64,
    #[serde(default = "one")]
    pub period: f64,
}

fn one() -> f64 {
    1.0
}

impl ScriptSegment {
    /// Forward speed and yaw rate at local time `t`.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        let s = (2.0 * std::f64::consts::PI * t / self.period).sin();
        (
            self.forward + self.forward_amplitude * s,
            self.yaw_rate + self.yaw_amplitude * s,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MobileConfig {
    pub script: Vec<ScriptSegment>,
    pub landmarks: Vec<[f64; 3]>,
    /// Start pose as `[x, y, yaw]`.
    #[serde(default)]
    pub initial_pose: [f64; 3],
    /// Odometry sampling rate (Hz).
    #[serde(default = "ten")]
    pub input_rate: f64,
    /// Ground-truth comparison rate (Hz).
    #[serde(default = "ten")]
    pub eval_rate: f64,
    /// Range measurement period (s).
    #[serde(default = "one")]
    pub dt_landmark: f64,
    /// Range variance (m^2).
    #[serde(default = "range_variance")]
    pub range_variance: f64,
    /// Forward speed and yaw rate variances of the odometry.
    #[serde(default = "velocity_variance")]
    pub velocity_variance: [f64; 2],
    /// Translational and rotational power-spectral densities with inputs.
    #[serde(default = "qc_inputs")]
    pub qc_inputs: [f64; 2],
    /// Translational and rotational power-spectral densities of the baseline.
    #[serde(default = "qc_wnoa")]
    pub qc_wnoa: [f64; 2],
    /// Standard deviations of the start-pose prior (m, rad).
    #[serde(default = "initial_sigma")]
    pub initial_sigma: [f64; 2],
    #[serde(default)]
    pub node_policy: NodePolicy,
    #[serde(default)]
    pub method: Method,
    /// Drive the bias with white noise of the active `Qc` in the forward and
    /// yaw channels; off by default.
    #[serde(default)]
    pub process_noise: bool,
    /// Add measurement and odometry noise.
    #[serde(default = "yes")]
    pub noisy: bool,
    /// With `noisy`, also perturb the odometry log.
    #[serde(default = "yes")]
    pub odometry_noise: bool,
}

fn ten() -> f64 {
    10.0
}
fn yes() -> bool {
    true
}
fn range_variance() -> f64 {
    9.0e-4
}
fn velocity_variance() -> [f64; 2] {
    [5.45e-4, 1.01e-3]
}
fn qc_inputs() -> [f64; 2] {
    [1.77e-5, 3.50e-5]
}
fn qc_wnoa() -> [f64; 2] {
    [2.11e-3, 3.94e-2]
}
fn initial_sigma() -> [f64; 2] {
    [1e-3, 1e-3]
}

impl MobileConfig {
    pub fn duration(&self) -> f64 {
        self.script.iter().map(|s| s.duration).sum()
    }

    /// Prior for the given method.
    pub fn hyper(&self, method: Method) -> Result<PriorHyper> {
        let q = match method {
            Method::Inputs => self.qc_inputs,
            Method::Wnoa => self.qc_wnoa,
        };
        PriorHyper::isotropic(q[0], q[1])
    }

    pub fn landmark_vectors(&self) -> Vec<Vector3<f64>> {
        self.landmarks.iter().map(|l| Vector3::from(*l)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.script.is_empty() {
            return Err(Error::Config("mobile script is empty".into()));
        }
        for (i, s) in self.script.iter().enumerate() {
            if !(s.duration > 0.0) || !(s.period > 0.0) {
                return Err(Error::Config(format!(
                    "script segment {i} needs positive duration and period"
                )));
            }
        }
        for (name, v) in [
            ("input_rate", self.input_rate),
            ("eval_rate", self.eval_rate),
            ("dt_landmark", self.dt_landmark),
            ("range_variance", self.range_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self
            .velocity_variance
            .iter()
            .chain(&self.qc_inputs)
            .chain(&self.qc_wnoa)
            .chain(&self.initial_sigma)
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::Config("variances must be positive".into()));
        }
        if self.landmarks.len() < 2 {
            return Err(Error::Config("need at least 2 landmarks".into()));
        }
        Ok(())
    }
}

/// Tendon routing; tensions come from the configurations.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TendonSpec {
    pub azimuth: f64,
    pub termination: f64,
    pub offset: f64,
}

/// One loading case: a tension per tendon and a tip force (N, base frame).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub tensions: Vec<f64>,
    #[serde(default)]
    pub tip_force: [f64; 3],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum TipSensor {
    Pose,
    #[default]
    Position,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ContinuumConfig {
    pub length: f64,
    pub diameter: f64,
    pub young: f64,
    #[serde(default = "poisson")]
    pub poisson: f64,
    pub disks: usize,
    #[serde(default = "eleven")]
    pub node_count: usize,
    pub tendons: Vec<TendonSpec>,
    pub cases: Vec<LoadCase>,
    #[serde(default)]
    pub sensor: TipSensor,
    #[serde(default = "continuum_qc")]
    pub qc: [f64; 6],
    #[serde(default = "r_pose")]
    pub r_pose: [f64; 6],
    #[serde(default)]
    pub noisy: bool,
}

fn poisson() -> f64 {
    0.3
}
fn eleven() -> usize {
    11
}
fn continuum_qc() -> [f64; 6] {
    [1e-2, 1e-2, 1e-2, 1e3, 1e3, 1e3]
}
fn r_pose() -> [f64; 6] {
    [4e-7, 4e-7, 4e-7, 2.5e-4, 2.5e-4, 2.5e-4]
}

impl ContinuumConfig {
    pub fn rod(&self) -> Result<RodModel> {
        RodModel::round(self.length, self.diameter, self.young, self.poisson, self.disks)
    }

    pub fn hyper(&self) -> Result<PriorHyper> {
        PriorHyper::diagonal(&Twist::from_column_slice(&self.qc))
    }

    /// Tendon routes loaded with the tensions of case `i`.
    pub fn tendons(&self, case: usize) -> Result<Vec<TendonRoute>> {
        let c = self
            .cases
            .get(case)
            .ok_or_else(|| Error::Config(format!("no load case {case}")))?;
        if c.tensions.len() != self.tendons.len() {
            return Err(Error::Config(format!(
                "load case {case} has {} tensions for {} tendons",
                c.tensions.len(),
                self.tendons.len()
            )));
        }
        Ok(self
            .tendons
            .iter()
            .zip(&c.tensions)
            .map(|(t, tension)| TendonRoute {
                offset_radius: t.offset,
                azimuth: t.azimuth,
                termination_arclength: t.termination,
                tension: *tension,
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        let rod = self.rod()?;
        if self.cases.is_empty() {
            return Err(Error::Config("continuum scenario has no load cases".into()));
        }
        for i in 0..self.cases.len() {
            for t in self.tendons(i)? {
                t.validate(&rod)?;
            }
        }
        if self.node_count < 2 {
            return Err(Error::Config("need at least 2 nodes".into()));
        }
        if self.r_pose.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("measurement variances must be positive".into()));
        }
        self.hyper()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub domain: Domain,
    #[serde(default)]
    pub seed: u64,
    pub mobile: Option<MobileConfig>,
    pub continuum: Option<ContinuumConfig>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.domain {
            Domain::Mobile => self.mobile()?.validate(),
            Domain::Continuum => self.continuum()?.validate(),
        }
    }

    pub fn mobile(&self) -> Result<&MobileConfig> {
        self.mobile
            .as_ref()
            .ok_or_else(|| Error::Config("missing [mobile] section".into()))
    }

    pub fn continuum(&self) -> Result<&ContinuumConfig> {
        self.continuum
            .as_ref()
            .ok_or_else(|| Error::Config("missing [continuum] section".into()))
    }

    pub fn mobile_mut(&mut self) -> Result<&mut MobileConfig> {
        self.mobile
            .as_mut()
            .ok_or_else(|| Error::Config("missing [mobile] section".into()))
    }

    /// The bundled twisty mobile scenario.
    pub fn bundled_mobile() -> Self {
        Self::from_toml(include_str!("../../scenarios/mobile_twisty.toml"))
            .expect("bundled mobile scenario is valid")
    }

    /// Monte-Carlo consistency scenario: truth sampled from the with-inputs
    /// prior, exact odometry, noisy ranges.
    pub fn bundled_consistency() -> Self {
        Self::from_toml(include_str!("../../scenarios/mobile_consistency.toml"))
            .expect("bundled consistency scenario is valid")
    }

    /// The bundled continuum scenario.
    pub fn bundled_continuum() -> Self {
        Self::from_toml(include_str!("../../scenarios/continuum.toml"))
            .expect("bundled continuum scenario is valid")
    }
}

/// Tip force of a load case as a vector.
pub fn tip_force(case: &LoadCase) -> Vector3<f64> {
    Vector3::from(case.tip_force)
}
