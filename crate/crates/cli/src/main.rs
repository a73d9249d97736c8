//! Command-line front end: simulate datasets, run estimators, sweep landmark
//! periods, reproduce the planar prior/posterior example and run the
//! continuum-robot cases.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ctgp::harness::experiment::SWEEP_DT_LANDMARK;
use ctgp::harness::output::{write_dataset, write_fig3, write_rows, write_shapes, write_trajectory};
use ctgp::harness::{
    reproduce_fig3, run_continuum, run_experiment, simulate_mobile, sweep, Domain, Method, MobileConfig,
    NodePolicy, ScenarioConfig, Variant,
};

#[derive(Parser)]
#[command(name = "ctgp", version, about = "Continuous-time GP estimation with exogenous inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a mobile-robot dataset (truth, ranges, odometry).
    Simulate(Common),
    /// Simulate and estimate one mobile run; writes trajectory.csv and metrics.csv.
    Estimate(Estimate),
    /// Landmark-period sweep for both methods; writes metrics.csv.
    Sweep(Sweep),
    /// Planar prior and posterior with velocity and acceleration inputs.
    Fig3 {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Continuum-robot shape estimation over every load case.
    Continuum(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; the bundled scenario for the subcommand when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Estimate {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    nodes: Option<NodePolicy>,
    #[arg(long = "dt-landmark")]
    dt_landmark: Option<f64>,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// Restrict the sweep to one method.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    nodes: Option<NodePolicy>,
    /// Comma-separated landmark periods.
    #[arg(long = "dt-landmark", value_delimiter = ',')]
    dt_landmark: Vec<f64>,
}

fn load(common: &Common, domain: Domain) -> Result<(ScenarioConfig, u64)> {
    let cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => match domain {
            Domain::Mobile => ScenarioConfig::bundled_mobile(),
            Domain::Continuum => ScenarioConfig::bundled_continuum(),
        },
    };
    if cfg.domain != domain {
        bail!("scenario domain is {:?}, this subcommand needs {:?}", cfg.domain, domain);
    }
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn mobile(cfg: &ScenarioConfig) -> Result<MobileConfig> {
    Ok(cfg.mobile()?.clone())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, seed) = load(&common, Domain::Mobile)?;
            let data = simulate_mobile(&mobile(&cfg)?, seed)?;
            std::fs::create_dir_all(&common.out)?;
            write_dataset(
                &data,
                create(&common.out, "truth.csv")?,
                create(&common.out, "ranges.csv")?,
                create(&common.out, "odometry.csv")?,
            )?;
            println!(
                "{} truth samples, {} ranges, {} odometry readings -> {}",
                data.truth.times.len(),
                data.ranges.len(),
                data.odometry.len(),
                common.out.display()
            );
        }
        Command::Estimate(args) => {
            let (cfg, seed) = load(&args.common, Domain::Mobile)?;
            let mut m = mobile(&cfg)?;
            if let Some(dt) = args.dt_landmark {
                m.dt_landmark = dt;
            }
            let method = args.method.unwrap_or(m.method);
            let policy = args.nodes.unwrap_or(m.node_policy);
            m.validate()?;
            let data = simulate_mobile(&m, seed)?;
            let res = run_experiment(&m, &data, method, policy)?;
            std::fs::create_dir_all(&args.common.out)?;
            write_trajectory(&res.trajectory, create(&args.common.out, "trajectory.csv")?)?;
            let row = res.row(method, policy, m.dt_landmark, seed);
            write_rows(std::slice::from_ref(&row), create(&args.common.out, "metrics.csv")?)?;
            println!(
                "{method} / {policy}: position RMSE {:.4} m, rotation RMSE {:.4} rad, {} nodes, {:.3} s",
                row.position_rmse, row.rotation_rmse, row.node_count, row.solve_time
            );
        }
        Command::Sweep(args) => {
            let (cfg, seed) = load(&args.common, Domain::Mobile)?;
            let m = mobile(&cfg)?;
            let methods = match args.method {
                Some(x) => vec![x],
                None => vec![Method::Inputs, Method::Wnoa],
            };
            let dts = if args.dt_landmark.is_empty() {
                SWEEP_DT_LANDMARK.to_vec()
            } else {
                args.dt_landmark
            };
            let policy = args.nodes.unwrap_or(NodePolicy::MeasurementTimesOnly);
            let rows = sweep(&m, seed, &dts, &methods, policy)?;
            std::fs::create_dir_all(&args.common.out)?;
            write_rows(&rows, create(&args.common.out, "metrics.csv")?)?;
            for r in &rows {
                println!("{:>6} dt_l = {:>4} s  position RMSE {:.4} m", r.method, r.dt_landmark, r.position_rmse);
            }
        }
        Command::Fig3 { out } => {
            std::fs::create_dir_all(&out)?;
            for variant in [Variant::Velocity, Variant::Acceleration] {
                let res = reproduce_fig3(variant)?;
                write_fig3(&res.prior, create(&out, &format!("fig3_{variant}_prior.csv"))?)?;
                write_fig3(&res.posterior, create(&out, &format!("fig3_{variant}_posterior.csv"))?)?;
                let end = res.posterior[res.posterior.len() - 1].position;
                println!(
                    "{variant}: measurement ({:.3}, {:.3}), posterior end ({:.3}, {:.3})",
                    res.measurement[0], res.measurement[1], end[0], end[1]
                );
            }
        }
        Command::Continuum(common) => {
            let (cfg, seed) = load(&common, Domain::Continuum)?;
            let c = cfg.continuum()?;
            let runs = run_continuum(c, seed)?;
            std::fs::create_dir_all(&common.out)?;
            let rows: Vec<_> = runs.iter().map(|r| r.row(c.sensor)).collect();
            write_rows(&rows, create(&common.out, "metrics.csv")?)?;
            write_shapes(&runs, create(&common.out, "shapes.csv")?)?;
            for pair in rows.chunks(2) {
                println!(
                    "case {}: inputs {:.2} mm, no-inputs {:.2} mm",
                    pair[0].case,
                    pair[0].position_rmse * 1e3,
                    pair[1].position_rmse * 1e3
                );
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
