//! Swarm layouts for the two deployments and where each camera's frames
//! are processed.

use std::collections::BTreeMap;

use thoth_core::query::Query;
use thoth_swarm::workload::{dc_swarm, dec_swarm, rsu_id, stream_uri, CLOUD_ID};
use thoth_swarm::{rewrite, NodeKind, SwarmState};

use crate::config::{ScenarioConfig, Topology};
use crate::SimError;

#[derive(Debug, Clone)]
pub struct Deployment {
    pub state: SwarmState,
    /// Camera index to the node hosting its detection.
    pub placement: Vec<String>,
    /// Detector service time per node, ms. Absent for nodes without one.
    pub service_ms: BTreeMap<String, f64>,
}

impl Deployment {
    pub fn root(&self) -> &str {
        &self.state.coordinator
    }

    /// Sum of link latencies from camera `c`'s RSU to the root.
    pub fn path_latency(&self, c: usize) -> f64 {
        self.state
            .path_to_root(&rsu_id(c))
            .iter()
            .filter_map(|n| self.state.member(n))
            .map(|m| m.link_ms)
            .sum()
    }
}

/// The swarm for `config` with link latencies applied. DEC assigns camera
/// `i` to edge `i mod num_edges`, and only edges that receive a camera join.
pub fn build_topology(config: &ScenarioConfig) -> SwarmState {
    let n = config.num_cameras;
    let mut s = match config.topology {
        Topology::DC => dc_swarm(n),
        Topology::DEC => dec_swarm(config.num_edges.min(n), n),
    };
    let ids: Vec<(String, Option<NodeKind>, Option<String>)> = s
        .members()
        .map(|(id, _)| (id.clone(), s.kind_of(id), s.parent(id).map(String::from)))
        .collect();
    for (id, kind, parent) in ids {
        let Some(parent) = parent else { continue };
        let ms = match (kind, parent == CLOUD_ID) {
            (Some(NodeKind::Rsu), true) => config.link_latency_rsu_cloud,
            (Some(NodeKind::Rsu), false) => config.link_latency_rsu_edge,
            _ => config.link_latency_edge_cloud,
        };
        s.set_link_latency(&id, ms).expect("member");
    }
    s
}

/// Places every camera stream where the federator puts the fragment that
/// reads it. Streams the plan does not read fall back to the root.
pub fn deploy(config: &ScenarioConfig, query: &Query) -> Result<Deployment, SimError> {
    config.validate()?;
    let state = build_topology(config);
    let plan = rewrite(query, &state).map_err(|e| SimError::Plan(e.to_string()))?;
    let root = state.coordinator.clone();
    let placement = (0..config.num_cameras)
        .map(|c| {
            let uri = stream_uri(c);
            plan.fragments
                .iter()
                .rev()
                .find(|f| f.streams.contains(&uri))
                .map(|f| f.placement.clone())
                .unwrap_or_else(|| root.clone())
        })
        .collect();
    let service_ms = state
        .members()
        .filter_map(|(id, m)| {
            let fps = match m.descriptor.kind {
                NodeKind::Cloud => config.cloud_fps,
                NodeKind::Edge => config.edge_fps,
                NodeKind::Rsu => return None,
            };
            Some((id.clone(), 1000.0 / fps))
        })
        .collect();
    Ok(Deployment {
        state,
        placement,
        service_ms,
    })
}
