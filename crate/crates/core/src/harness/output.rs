//! Comma-separated artifacts.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::experiment::{pose_columns, TrajectoryRow};
use crate::harness::fig3::Fig3Row;
use crate::harness::simulate::MobileDataset;
use crate::harness::shape::ShapeRun;

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// `time`, ground-truth pose, estimated pose, 6 velocity entries and 12
/// covariance diagonal entries. Poses are world position and rotation vector.
pub fn write_trajectory<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    for prefix in ["gt", "est"] {
        for c in ["x", "y", "z", "rx", "ry", "rz"] {
            header.push(format!("{prefix}_{c}"));
        }
    }
    header.extend((1..=6).map(|i| format!("vel{i}")));
    header.extend((1..=12).map(|i| format!("cov{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![num(r.time)];
        rec.extend(pose_columns(&r.truth).iter().map(|x| num(*x)));
        rec.extend(pose_columns(&r.estimate).iter().map(|x| num(*x)));
        rec.extend(r.velocity.iter().map(|x| num(*x)));
        rec.extend(r.covariance_diagonal.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One header row plus one row per serialized record.
pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fig3<W: Write>(rows: &[Fig3Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["time", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=6).map(|i| format!("vel{i}")));
    header.extend(["x_3sigma", "y_3sigma", "z_3sigma"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![num(r.time)];
        rec.extend(r.position.iter().map(|x| num(*x)));
        rec.extend(r.velocity.iter().map(|x| num(*x)));
        rec.extend(r.sigma3.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Ground truth on its grid plus the range and odometry logs, in three
/// writers.
pub fn write_dataset<A: Write, B: Write, C: Write>(
    data: &MobileDataset,
    truth: A,
    ranges: B,
    odometry: C,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(truth);
    w.write_record(["time", "x", "y", "z", "rx", "ry", "rz"])?;
    for (t, p) in data.truth.times.iter().zip(&data.truth.poses) {
        let mut rec = vec![num(*t)];
        rec.extend(pose_columns(p).iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(ranges);
    w.write_record(["time", "landmark", "range"])?;
    for r in &data.ranges {
        w.write_record([num(r.time), r.landmark.to_string(), num(r.range)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(odometry);
    w.write_record(["time", "forward", "yaw_rate"])?;
    for o in &data.odometry {
        w.write_record([num(o.time), num(o.forward), num(o.yaw_rate)])?;
    }
    w.flush()?;
    Ok(())
}

/// Disk arclength with true and estimated positions for each run.
pub fn write_shapes<W: Write>(runs: &[ShapeRun], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "case", "method", "arclength", "gt_x", "gt_y", "gt_z", "est_x", "est_y", "est_z",
    ])?;
    for run in runs {
        let method = if run.with_inputs { "inputs" } else { "no-inputs" };
        for ((s, gt), est) in run.arclengths.iter().zip(&run.truth).zip(&run.estimate) {
            let (a, b) = (gt.world_position(), est.world_position());
            let mut rec = vec![run.case.to_string(), method.to_string(), num(*s)];
            rec.extend(a.iter().chain(b.iter()).map(|x| num(*x)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
