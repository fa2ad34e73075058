//! Discrete-event model of camera swarms streaming to a cloud, directly or
//! through edge devices.

pub mod config;
pub mod des;
pub mod metrics;
pub mod model;
pub mod topology;

use thiserror::Error;
use thoth_core::query::{format_errors, parse_query, Query};

pub use config::{FramePolicy, ScenarioConfig, Topology};
pub use des::{Event, EventKind, EventQueue};
pub use metrics::{csv_string, emit_csv, percentile, write_csv, DelaySample, Metrics, SummaryRow};
pub use model::{run_simulation, simulate};
pub use topology::{build_topology, deploy, Deployment};

/// Camera counts on the x-axis of the scaling experiment.
pub const SWEEP: [usize; 5] = [8, 16, 24, 32, 40];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("federation: {0}")]
    Plan(String),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// The federated query whose fragments decide placement.
pub fn default_query() -> Query {
    parse_query(thoth_swarm::LISTING4)
        .unwrap_or_else(|e| panic!("shipped query: {}", format_errors(&e)))
}

/// Both topologies at every camera count in `ns`, DC rows first.
pub fn sweep(base: &ScenarioConfig, ns: &[usize], query: &Query) -> Result<Vec<SummaryRow>, SimError> {
    let mut rows = Vec::new();
    for topo in [Topology::DC, Topology::DEC] {
        for &n in ns {
            let m = run_simulation(&base.with(topo, n), query)?;
            log::debug!("{topo} n={n}: {} events", m.events);
            rows.push(m.summarize());
        }
    }
    Ok(rows)
}
