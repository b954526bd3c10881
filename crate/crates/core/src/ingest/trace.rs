//! Timestamped trace files.
//!
//! Format: a header row such as `timestamp,wind_speed_m_per_s`, then one
//! `timestamp_iso8601,value` record per line. Timestamps are RFC 3339 or
//! naive `YYYY-MM-DDTHH:MM[:SS]` (read as UTC). Blank lines and lines starting
//! with `#` are skipped.

use std::io::{self, BufRead, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace has no header row")]
    MissingHeader,
    #[error("trace has no records")]
    Empty,
    #[error("timestamps must be strictly increasing (line {0})")]
    NonMonotone(usize),
}

/// Start time of generated traces, `2013-03-01T00:00:00Z`.
pub fn trace_start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_362_096_000, 0).expect("valid timestamp")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Second column of the header, e.g. `price_usd_per_kwh`.
    pub unit: String,
    pub times: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

impl Trace {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut unit = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let no = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let Some((a, b)) = text.split_once(',') else {
                return Err(TraceError::Parse {
                    line: no,
                    reason: "expected two comma separated fields".into(),
                });
            };
            let (a, b) = (a.trim(), b.trim());
            if unit.is_none() {
                unit = Some(b.to_string());
                continue;
            }
            let t = parse_time(a).ok_or_else(|| TraceError::Parse {
                line: no,
                reason: format!("bad timestamp {a:?}"),
            })?;
            let v: f64 = b.parse().map_err(|_| TraceError::Parse {
                line: no,
                reason: format!("bad value {b:?}"),
            })?;
            if !v.is_finite() {
                return Err(TraceError::Parse {
                    line: no,
                    reason: "value is not finite".into(),
                });
            }
            if times.last().is_some_and(|&last| t <= last) {
                return Err(TraceError::NonMonotone(no));
            }
            times.push(t);
            values.push(v);
        }
        let unit = unit.ok_or(TraceError::MissingHeader)?;
        if times.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(Self { unit, times, values })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        Self::read(io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "timestamp,{}", self.unit)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", t.format("%Y-%m-%dT%H:%M:%SZ"), v)?;
        }
        Ok(())
    }

    /// Minutes since the first record.
    pub fn minutes(&self) -> Vec<f64> {
        let t0 = self.times[0];
        self.times
            .iter()
            .map(|t| (*t - t0).num_seconds() as f64 / 60.0)
            .collect()
    }

    /// Builds a trace with evenly spaced records starting at `start`.
    pub fn regular(unit: &str, start: DateTime<Utc>, step_minutes: i64, values: Vec<f64>) -> Self {
        let times = (0..values.len() as i64)
            .map(|k| start + chrono::Duration::minutes(k * step_minutes))
            .collect();
        Self {
            unit: unit.to_string(),
            times,
            values,
        }
    }
}
