//! Delay statistics and the CSV summary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::config::Topology;
use crate::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySample {
    pub camera: usize,
    pub frame: u64,
    pub generated_at: f64,
    /// Generation to the end of the merge at the root.
    pub delay_ms: f64,
    /// Link latencies from the camera's RSU to the root.
    pub path_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub topology: Topology,
    pub num_cameras: usize,
    pub samples: Vec<DelaySample>,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Generated but neither delivered nor dropped when the run ended.
    pub in_flight: u64,
    /// Busy fraction of each compute node's detector.
    pub utilization: BTreeMap<String, f64>,
    pub served: BTreeMap<String, u64>,
    pub timing_ticks: u64,
    /// Arrival time of tick 0 at every node.
    pub first_tick_ms: BTreeMap<String, f64>,
    pub events: u64,
}

impl Metrics {
    fn sorted(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.samples.iter().map(|s| s.delay_ms).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    pub fn mean_delay(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.delay_ms).sum::<f64>() / self.samples.len() as f64
    }

    pub fn median_delay(&self) -> f64 {
        percentile(&self.sorted(), 50.0)
    }

    pub fn p95_delay(&self) -> f64 {
        percentile(&self.sorted(), 95.0)
    }

    pub fn drop_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.dropped as f64 / self.generated as f64
        }
    }

    pub fn summarize(&self) -> SummaryRow {
        SummaryRow {
            topology: self.topology,
            num_cameras: self.num_cameras,
            mean_delay_ms: self.mean_delay(),
            p95_delay_ms: self.p95_delay(),
            drop_rate: self.drop_rate(),
        }
    }
}

/// Nearest-rank percentile of sorted values; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub topology: Topology,
    pub num_cameras: usize,
    pub mean_delay_ms: f64,
    pub p95_delay_ms: f64,
    pub drop_rate: f64,
}

pub const CSV_HEADER: [&str; 5] = ["topology", "num_cameras", "mean_delay_ms", "p95_delay_ms", "drop_rate"];

pub fn write_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.topology.to_string(),
            r.num_cameras.to_string(),
            format!("{:.3}", r.mean_delay_ms),
            format!("{:.3}", r.p95_delay_ms),
            format!("{:.4}", r.drop_rate),
        ])?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}

pub fn csv_string(rows: &[SummaryRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("ascii")
}

pub fn emit_csv(rows: &[SummaryRow], path: &Path) -> Result<(), SimError> {
    let f = std::fs::File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    write_csv(rows, f)
}
