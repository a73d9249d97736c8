//! Simulation and evaluation harness behind the command-line tool.

pub mod config;
pub mod experiment;
pub mod fig3;
pub mod metrics;
pub mod output;
pub mod shape;
pub mod simulate;

pub use config::{Domain, Method, MobileConfig, NodePolicy, ScenarioConfig};
pub use experiment::{run_experiment, sweep, MetricsRow, RunResult};
pub use fig3::{reproduce_fig3, Variant};
pub use metrics::Metrics;
pub use shape::run_continuum;
pub use simulate::{simulate_mobile, MobileDataset};
