//! Swarm membership, query fragmentation with COUNT pushdown, partial
//! merging, the timing stream and the wire format between nodes.

pub mod descriptor;
pub mod exec;
pub mod plan;
pub mod state;
pub mod wire;
pub mod workload;

use thiserror::Error;

pub use descriptor::{Capabilities, NodeDescriptor, NodeKind, StreamDescriptor};
pub use exec::{
    centralized_select, check_against_centralized, combine, merge_partials, run_federated, FederatedRun,
    PartialPayload, PartialResult, TraceEvent,
};
pub use plan::{leaf_query, rewrite, CountPartial, FragmentPlan, FragmentRole, PlanMode, QueryFragment};
pub use state::{discover, propagate_timing, Ack, Member, Role, SwarmState, TimingSchedule};
pub use wire::{Envelope, InProcessNetwork, Message, StreamTransport, Transport, WireError};

/// The federated trucks-per-camera query.
pub const LISTING4: &str = include_str!("../../../corpus/golden/listing4.rq");

#[derive(Debug, Error)]
pub enum SwarmError {
    #[error("node '{0}' is already a member")]
    DuplicateId(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("subscribing '{node}' under '{parent}' would create a cycle")]
    Cycle { node: String, parent: String },
    #[error("stream {0} is already in the catalog")]
    DuplicateStream(String),
    #[error("the coordinator cannot leave or move")]
    CoordinatorLeave,
    #[error("descriptor: {0}")]
    Descriptor(String),
    #[error("only SELECT queries can be federated")]
    NotSelect,
    #[error("aggregate {0} cannot be merged from partials; only COUNT is supported")]
    UnsupportedAggregate(String),
    #[error("partial from {fragment} has watermark {got}, expected {expected}")]
    WatermarkMismatch { fragment: String, expected: u64, got: u64 },
    #[error("partial: {0}")]
    Partial(String),
    #[error("node {node} received tick {tick} after a later one")]
    StaleTick { node: String, tick: u64 },
    #[error("the root never received all partials")]
    Incomplete,
    #[error(transparent)]
    Wire(#[from] WireError),
}
