use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};

/// Processing cost of one window against the `T_r` budget.
///
/// Durations are integer nanoseconds so that
/// `feature + inference + excess == budget` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub block_index: u64,
    pub feature_ns: u64,
    pub inference_ns: u64,
    pub budget_ns: u64,
    pub excess_ns: i64,
    pub overrun: bool,
}

impl LatencyReport {
    pub fn new(block_index: u64, feature: Duration, inference: Duration, budget: Duration) -> Self {
        let ns = |d: Duration| u64::try_from(d.as_nanos()).unwrap_or(u64::MAX);
        let (feature_ns, inference_ns, budget_ns) = (ns(feature), ns(inference), ns(budget));
        let excess_ns = budget_ns as i64 - feature_ns as i64 - inference_ns as i64;
        Self {
            block_index,
            feature_ns,
            inference_ns,
            budget_ns,
            excess_ns,
            overrun: excess_ns < 0,
        }
    }

    pub fn feature_seconds(&self) -> f64 {
        self.feature_ns as f64 * 1e-9
    }

    pub fn inference_seconds(&self) -> f64 {
        self.inference_ns as f64 * 1e-9
    }

    pub fn excess_seconds(&self) -> f64 {
        self.excess_ns as f64 * 1e-9
    }

    pub fn budget_seconds(&self) -> f64 {
        self.budget_ns as f64 * 1e-9
    }
}

/// `excess = T_r - feature - inference`, overrun iff negative. Inputs are
/// rounded to whole nanoseconds.
pub fn check_budget(feature_s: f64, inference_s: f64, block_seconds: f64) -> Result<LatencyReport> {
    for (name, v) in [("feature", feature_s), ("inference", inference_s), ("block", block_seconds)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SeldError::InvalidRange(format!("{name} time must be >= 0, got {v}")));
        }
    }
    let d = |s: f64| Duration::from_nanos((s * 1e9).round() as u64);
    Ok(LatencyReport::new(0, d(feature_s), d(inference_s), d(block_seconds)))
}

/// Header row of the latency log.
pub const LATENCY_CSV_HEADER: [&str; 5] = ["block_index", "feature_s", "inference_s", "excess_s", "overrun"];

/// Streams latency rows as CSV.
pub struct LatencyCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> LatencyCsvWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(LATENCY_CSV_HEADER).map_err(csv_io)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &LatencyReport) -> Result<()> {
        self.inner
            .write_record(&[
                r.block_index.to_string(),
                format!("{:.9}", r.feature_seconds()),
                format!("{:.9}", r.inference_seconds()),
                format!("{:.9}", r.excess_seconds()),
                r.overrun.to_string(),
            ])
            .map_err(csv_io)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_io(err: csv::Error) -> SeldError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => SeldError::Io(e),
        other => SeldError::Config(format!("csv: {other:?}")),
    }
}
