//! Continuous-time Gaussian-process motion priors on SE(3) with exogenous
//! velocity and acceleration inputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod error;
pub mod factors;
pub mod harness;
pub mod inputs;
pub mod interpolation;
pub mod liegroup;
pub mod prior;
pub mod solver;

pub use continuum::{RodModel, RodSimulator, ShapeConfig, ShapeEstimate, ShapeMeasurement, TendonRoute};
pub use error::{Error, Result};
pub use factors::{FactorEval, PLANAR_LOCK_INFORMATION, JacobianMode, Measurement, StateNode};
pub use inputs::{InputLog, InputProfile, InputSegment};
pub use interpolation::{JointCovariance, QueryResult};
pub use liegroup::{LocalState, Matrix12, Pose, Twist, Vector12};
pub use prior::{IntervalBlocks, PriorHyper, SegmentCoeffs};
pub use solver::{solve, Anchor, Attachment, MeasurementFactor, Problem, Solution, SolverSettings};
