//! Piecewise-linear velocity and acceleration input profiles over one node
//! interval, plus ingestion of sampled input logs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::liegroup::Twist;

/// Default upper bound on a single segment's duration.
pub const DEFAULT_MAX_SEGMENT: f64 = 0.5;

/// One linear piece of the velocity and acceleration inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSegment {
    pub v_start: Twist,
    pub v_end: Twist,
    pub a_start: Twist,
    pub a_end: Twist,
    pub duration: f64,
}

impl InputSegment {
    pub fn new(
        v_start: Twist,
        v_end: Twist,
        a_start: Twist,
        a_end: Twist,
        duration: f64,
    ) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "segment duration must be positive, got {duration}"
            )));
        }
        let finite = [&v_start, &v_end, &a_start, &a_end]
            .iter()
            .all(|x| x.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidProfile("non-finite input value".into()));
        }
        Ok(Self {
            v_start,
            v_end,
            a_start,
            a_end,
            duration,
        })
    }

    pub fn constant(v: Twist, a: Twist, duration: f64) -> Result<Self> {
        Self::new(v, v, a, a, duration)
    }

    pub fn zero(duration: f64) -> Result<Self> {
        Self::constant(Twist::zeros(), Twist::zeros(), duration)
    }

    pub fn velocity_at(&self, local: f64) -> Twist {
        let s = local / self.duration;
        self.v_start + (self.v_end - self.v_start) * s
    }

    pub fn acceleration_at(&self, local: f64) -> Twist {
        let s = local / self.duration;
        self.a_start + (self.a_end - self.a_start) * s
    }

    /// Velocity slope per unit time.
    pub fn velocity_slope(&self) -> Twist {
        (self.v_end - self.v_start) / self.duration
    }

    pub fn acceleration_slope(&self) -> Twist {
        (self.a_end - self.a_start) / self.duration
    }

    pub fn is_zero(&self) -> bool {
        self.v_start.iter().all(|v| *v == 0.0)
            && self.v_end.iter().all(|v| *v == 0.0)
            && self.a_start.iter().all(|v| *v == 0.0)
            && self.a_end.iter().all(|v| *v == 0.0)
    }

    fn split(&self, pieces: usize) -> Vec<InputSegment> {
        let h = self.duration / pieces as f64;
        (0..pieces)
            .map(|i| {
                let (t0, t1) = (i as f64 * h, (i + 1) as f64 * h);
                let t1 = if i + 1 == pieces { self.duration } else { t1 };
                InputSegment {
                    v_start: self.velocity_at(t0),
                    v_end: if i + 1 == pieces { self.v_end } else { self.velocity_at(t1) },
                    a_start: self.acceleration_at(t0),
                    a_end: if i + 1 == pieces { self.a_end } else { self.acceleration_at(t1) },
                    duration: t1 - t0,
                }
            })
            .collect()
    }
}

/// Piecewise-linear inputs tiling one node interval. Right-continuous at knots.
#[derive(Clone, Debug, PartialEq)]
pub struct InputProfile {
    segments: Vec<InputSegment>,
    starts: Vec<f64>,
    total_duration: f64,
}

impl InputProfile {
    /// Builds a profile, splitting segments longer than [`DEFAULT_MAX_SEGMENT`].
    pub fn new(segments: Vec<InputSegment>) -> Result<Self> {
        Self::with_max_segment(segments, DEFAULT_MAX_SEGMENT)
    }

    /// Builds a profile, splitting any non-zero segment longer than
    /// `max_segment` into equal linear pieces. All-zero segments are kept whole
    /// since every downstream integral over them is exact.
    pub fn with_max_segment(segments: Vec<InputSegment>, max_segment: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidProfile("profile needs at least one segment".into()));
        }
        if !(max_segment > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "maximum segment duration must be positive, got {max_segment}"
            )));
        }
        let mut out = Vec::with_capacity(segments.len());
        for seg in segments {
            if !(seg.duration > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "segment duration must be positive, got {}",
                    seg.duration
                )));
            }
            if !seg.is_zero() && seg.duration > max_segment * (1.0 + 1e-12) {
                let pieces = (seg.duration / max_segment).ceil() as usize;
                out.extend(seg.split(pieces));
            } else {
                out.push(seg);
            }
        }
        let mut starts = Vec::with_capacity(out.len());
        let mut acc = 0.0;
        for seg in &out {
            starts.push(acc);
            acc += seg.duration;
        }
        Ok(Self {
            segments: out,
            starts,
            total_duration: acc,
        })
    }

    /// A profile with identically zero inputs; the prior reduces to
    /// white-noise-on-acceleration.
    pub fn zero(duration: f64) -> Result<Self> {
        Self::new(vec![InputSegment::zero(duration)?])
    }

    pub fn segments(&self) -> &[InputSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Local start time of every segment.
    pub fn segment_starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(InputSegment::is_zero)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let tol = 1e-12 * self.total_duration.max(1.0);
        if !(t >= -tol && t <= self.total_duration + tol) {
            return Err(Error::Domain {
                value: t,
                lower: 0.0,
                upper: self.total_duration,
            });
        }
        Ok(())
    }

    /// Index of the segment containing `t` (right-continuous) and the local
    /// offset inside it.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        self.check_domain(t)?;
        let t = t.clamp(0.0, self.total_duration);
        let idx = match self.starts.partition_point(|s| *s <= t) {
            0 => 0,
            n => n - 1,
        };
        let local = (t - self.starts[idx]).min(self.segments[idx].duration);
        Ok((idx, local))
    }

    /// Velocity and acceleration inputs at local time `t`.
    pub fn evaluate(&self, t: f64) -> Result<(Twist, Twist)> {
        let (idx, local) = self.locate(t)?;
        let seg = &self.segments[idx];
        Ok((seg.velocity_at(local), seg.acceleration_at(local)))
    }

    /// Left limit of the inputs at `t`; differs from [`evaluate`] only at knots
    /// where the inputs jump.
    ///
    /// [`evaluate`]: InputProfile::evaluate
    pub fn evaluate_left(&self, t: f64) -> Result<(Twist, Twist)> {
        let (idx, local) = self.locate(t)?;
        if idx > 0 && local == 0.0 {
            let seg = &self.segments[idx - 1];
            return Ok((seg.v_end, seg.a_end));
        }
        let seg = &self.segments[idx];
        Ok((seg.velocity_at(local), seg.acceleration_at(local)))
    }

    /// Tiles `interval` with one segment per sample gap overlapping it. Values
    /// at clipped boundaries are linearly interpolated from the samples.
    pub fn from_samples(
        times: &[f64],
        v_samples: &[Twist],
        a_samples: &[Twist],
        interval: (f64, f64),
    ) -> Result<Self> {
        Self::from_samples_with_max(times, v_samples, a_samples, interval, DEFAULT_MAX_SEGMENT)
    }

    pub fn from_samples_with_max(
        times: &[f64],
        v_samples: &[Twist],
        a_samples: &[Twist],
        interval: (f64, f64),
        max_segment: f64,
    ) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 samples, got {}",
                times.len()
            )));
        }
        if v_samples.len() != times.len() || a_samples.len() != times.len() {
            return Err(Error::DegenerateInput(
                "sample arrays have mismatched lengths".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateInput(
                "sample times must be strictly increasing".into(),
            ));
        }
        let (start, end) = interval;
        let tol = 1e-9;
        if !(end > start) {
            return Err(Error::DegenerateInput(format!(
                "empty interval [{start}, {end}]"
            )));
        }
        if start < times[0] - tol || end > times[times.len() - 1] + tol {
            return Err(Error::Coverage { start, end });
        }

        let sample_at = |t: f64| -> (Twist, Twist) {
            let n = times.len();
            let i = times.partition_point(|s| *s <= t).clamp(1, n - 1);
            let (t0, t1) = (times[i - 1], times[i]);
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            (
                v_samples[i - 1] + (v_samples[i] - v_samples[i - 1]) * w,
                a_samples[i - 1] + (a_samples[i] - a_samples[i - 1]) * w,
            )
        };

        let mut knots = vec![start];
        knots.extend(
            times
                .iter()
                .copied()
                .filter(|t| *t > start + tol && *t < end - tol),
        );
        knots.push(end);

        let mut segments = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            let (v0, a0) = sample_at(w[0]);
            let (v1, a1) = sample_at(w[1]);
            segments.push(InputSegment::new(v0, v1, a0, a1, w[1] - w[0])?);
        }
        Self::with_max_segment(segments, max_segment)
    }
}

/// Sampled input log: time, 6 velocity entries, 6 acceleration entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputLog {
    pub times: Vec<f64>,
    pub velocities: Vec<Twist>,
    pub accelerations: Vec<Twist>,
}

impl InputLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, v: Twist, a: Twist) {
        self.times.push(t);
        self.velocities.push(v);
        self.accelerations.push(a);
    }

    pub fn profile(&self, interval: (f64, f64), max_segment: f64) -> Result<InputProfile> {
        InputProfile::from_samples_with_max(
            &self.times,
            &self.velocities,
            &self.accelerations,
            interval,
            max_segment,
        )
    }

    /// Reads comma-separated rows `time, v1..v6[, a1..a6]`. A leading header
    /// row is skipped; missing acceleration columns read as zero.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut log = InputLog::default();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let fields: Vec<&str> = record.iter().collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::DegenerateInput(format!(
                        "row {}: {e}",
                        row + 1
                    )))
                }
            };
            if values.len() != 7 && values.len() != 13 {
                return Err(Error::DegenerateInput(format!(
                    "row {}: expected 7 or 13 columns, got {}",
                    row + 1,
                    values.len()
                )));
            }
            let v = Twist::from_column_slice(&values[1..7]);
            let a = if values.len() == 13 {
                Twist::from_column_slice(&values[7..13])
            } else {
                Twist::zeros()
            };
            log.push(values[0], v, a);
        }
        Ok(log)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend((1..=6).map(|i| format!("v{i}")));
        header.extend((1..=6).map(|i| format!("a{i}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![format!("{:.17e}", self.times[i])];
            row.extend(self.velocities[i].iter().map(|x| format!("{x:.17e}")));
            row.extend(self.accelerations[i].iter().map(|x| format!("{x:.17e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
