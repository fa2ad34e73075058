//! Swarm membership held by the coordinator: members, parent links, the
//! stream catalog, discovery and the timing stream schedule.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thoth_core::query::{Pattern, Projection, Query, QueryForm};
use thoth_core::rdf::{Iri, KnowledgeGraph, Term, Triple};
use thoth_core::reason::{solutions, EvalContext, StreamSet};

use crate::descriptor::{NodeDescriptor, NodeKind};
use crate::SwarmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Coordinator,
    /// Can host query fragments.
    Processor,
    /// Only publishes streams.
    Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub descriptor: NodeDescriptor,
    pub role: Role,
    pub joined_at: u64,
    /// Latency of the link to the parent, in ms. Zero for the coordinator.
    pub link_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub owner: String,
    pub content_type: String,
    pub provenance: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ack {
    pub id: String,
    pub parent: String,
    pub joined_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub coordinator: String,
    members: BTreeMap<String, Member>,
    parents: BTreeMap<String, String>,
    catalog: BTreeMap<Iri, CatalogEntry>,
    /// Current tick, stamped on joins.
    pub clock: u64,
}

fn role_of(d: &NodeDescriptor, coordinator: bool) -> Role {
    if coordinator {
        Role::Coordinator
    } else if d.capabilities.reasoner {
        Role::Processor
    } else {
        Role::Source
    }
}

impl SwarmState {
    /// A swarm with a single seed node acting as coordinator.
    pub fn new(seed: NodeDescriptor) -> Result<Self, SwarmError> {
        let mut s = SwarmState {
            coordinator: seed.id.clone(),
            members: BTreeMap::new(),
            parents: BTreeMap::new(),
            catalog: BTreeMap::new(),
            clock: 0,
        };
        s.add_streams(&seed)?;
        let mut seed = seed;
        seed.parent = None;
        s.members.insert(
            seed.id.clone(),
            Member {
                role: role_of(&seed, true),
                descriptor: seed,
                joined_at: 0,
                link_ms: 0.0,
            },
        );
        Ok(s)
    }

    fn add_streams(&mut self, d: &NodeDescriptor) -> Result<(), SwarmError> {
        let mut seen = BTreeSet::new();
        for s in &d.streams {
            if self.catalog.contains_key(&s.uri) || !seen.insert(&s.uri) {
                return Err(SwarmError::DuplicateStream(s.uri.to_string()));
            }
        }
        for s in &d.streams {
            self.catalog.insert(
                s.uri.clone(),
                CatalogEntry {
                    owner: d.id.clone(),
                    content_type: s.content_type.clone(),
                    provenance: s.provenance.clone(),
                },
            );
        }
        Ok(())
    }

    /// Adds `child` under `parent` with a zero-latency link.
    pub fn subscribe(&mut self, child: NodeDescriptor, parent: &str) -> Result<Ack, SwarmError> {
        self.subscribe_with_latency(child, parent, 0.0)
    }

    pub fn subscribe_with_latency(
        &mut self,
        mut child: NodeDescriptor,
        parent: &str,
        link_ms: f64,
    ) -> Result<Ack, SwarmError> {
        if child.id == parent {
            return Err(SwarmError::Cycle {
                node: child.id,
                parent: parent.into(),
            });
        }
        if self.members.contains_key(&child.id) {
            return Err(SwarmError::DuplicateId(child.id));
        }
        if !self.members.contains_key(parent) {
            return Err(SwarmError::UnknownNode(parent.into()));
        }
        if !(link_ms.is_finite() && link_ms >= 0.0) {
            return Err(SwarmError::Descriptor(format!("bad link latency {link_ms}")));
        }
        self.add_streams(&child)?;
        child.parent = Some(parent.into());
        let id = child.id.clone();
        self.parents.insert(id.clone(), parent.into());
        self.members.insert(
            id.clone(),
            Member {
                role: role_of(&child, false),
                descriptor: child,
                joined_at: self.clock,
                link_ms,
            },
        );
        Ok(Ack {
            id,
            parent: parent.into(),
            joined_at: self.clock,
        })
    }

    /// Removes a node. Its children move to its parent; its streams leave
    /// the catalog.
    pub fn unsubscribe(&mut self, id: &str) -> Result<(), SwarmError> {
        if id == self.coordinator {
            return Err(SwarmError::CoordinatorLeave);
        }
        let parent = self
            .parents
            .remove(id)
            .ok_or_else(|| SwarmError::UnknownNode(id.into()))?;
        self.members.remove(id);
        for c in self.children(id) {
            self.parents.insert(c.clone(), parent.clone());
            if let Some(m) = self.members.get_mut(&c) {
                m.descriptor.parent = Some(parent.clone());
            }
        }
        self.catalog.retain(|_, e| e.owner != id);
        Ok(())
    }

    /// Re-subscribes an existing node under a new parent.
    pub fn move_node(&mut self, id: &str, new_parent: &str) -> Result<(), SwarmError> {
        if id == self.coordinator {
            return Err(SwarmError::CoordinatorLeave);
        }
        if !self.members.contains_key(id) {
            return Err(SwarmError::UnknownNode(id.into()));
        }
        if !self.members.contains_key(new_parent) {
            return Err(SwarmError::UnknownNode(new_parent.into()));
        }
        if self.path_to_root(new_parent).iter().any(|n| n == id) {
            return Err(SwarmError::Cycle {
                node: id.into(),
                parent: new_parent.into(),
            });
        }
        self.parents.insert(id.into(), new_parent.into());
        if let Some(m) = self.members.get_mut(id) {
            m.descriptor.parent = Some(new_parent.into());
        }
        Ok(())
    }

    pub fn set_link_latency(&mut self, id: &str, ms: f64) -> Result<(), SwarmError> {
        let m = self
            .members
            .get_mut(id)
            .ok_or_else(|| SwarmError::UnknownNode(id.into()))?;
        m.link_ms = ms;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, id: &str) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn members(&self) -> impl Iterator<Item = (&String, &Member)> {
        self.members.iter()
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parents.get(id).map(String::as_str)
    }

    /// Children in id order.
    pub fn children(&self, id: &str) -> Vec<String> {
        self.parents
            .iter()
            .filter(|(_, p)| p.as_str() == id)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// `id`, its parent, ..., the coordinator. Stops early on a broken link.
    pub fn path_to_root(&self, id: &str) -> Vec<String> {
        let mut out = vec![id.to_string()];
        let mut cur = id;
        while let Some(p) = self.parents.get(cur) {
            if out.iter().any(|x| x == p) {
                break;
            }
            out.push(p.clone());
            cur = p;
        }
        out
    }

    /// Members in breadth-first order from the coordinator, children by id.
    pub fn bfs(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut q = VecDeque::from([self.coordinator.clone()]);
        while let Some(n) = q.pop_front() {
            q.extend(self.children(&n));
            out.push(n);
        }
        out
    }

    /// Checks that the parent links form a tree rooted at the coordinator
    /// that spans every member.
    pub fn check_tree(&self) -> Result<(), String> {
        if self.parents.contains_key(&self.coordinator) {
            return Err("coordinator has a parent".into());
        }
        for id in self.members.keys() {
            let path = self.path_to_root(id);
            if path.last() != Some(&self.coordinator) {
                return Err(format!("{id} does not reach the coordinator"));
            }
        }
        if self.parents.len() + 1 != self.members.len() {
            return Err("parent links and members disagree".into());
        }
        if self.bfs().len() != self.members.len() {
            return Err("unreachable members".into());
        }
        Ok(())
    }

    pub fn catalog(&self) -> &BTreeMap<Iri, CatalogEntry> {
        &self.catalog
    }

    /// Streams published by `id` and every node below it.
    pub fn subtree_streams(&self, id: &str) -> Vec<Iri> {
        self.catalog
            .iter()
            .filter(|(_, e)| self.path_to_root(&e.owner).iter().any(|n| n == id))
            .map(|(u, _)| u.clone())
            .collect()
    }

    /// Every provenance triple in the catalog.
    pub fn catalog_graph(&self) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        for e in self.catalog.values() {
            g.extend(e.provenance.iter().cloned());
        }
        g
    }

    /// Copies catalog provenance into the metadata of matching streams.
    pub fn annotate(&self, streams: &mut StreamSet) {
        for (uri, s) in streams.iter_mut() {
            if let Some(e) = self.catalog.get(uri) {
                s.metadata.extend(e.provenance.iter().cloned());
            }
        }
    }

    /// Lowest node on the path from `id` to the root that can host a
    /// fragment; `None` if there is none.
    pub fn lowest_processor(&self, id: &str) -> Option<String> {
        self.path_to_root(id).into_iter().find(|n| {
            self.members
                .get(n)
                .is_some_and(|m| m.descriptor.capabilities.reasoner)
        })
    }

    pub fn kind_of(&self, id: &str) -> Option<NodeKind> {
        self.members.get(id).map(|m| m.descriptor.kind)
    }
}

/// Catalog streams whose provenance satisfies `patterns` with `var` bound to
/// the stream URI. Sorted, without duplicates.
pub fn discover(state: &SwarmState, patterns: &[Pattern], var: &str) -> Vec<Iri> {
    let mut q = Query::empty(QueryForm::Select {
        projection: vec![Projection::Var(var.into())],
    });
    q.static_patterns = patterns.to_vec();
    let streams = StreamSet::new();
    let graph = state.catalog_graph();
    let ctx = EvalContext::new(&streams, &graph, 0, 1);
    let found: BTreeSet<Iri> = solutions(&q, &ctx)
        .iter()
        .filter_map(|b| match b.get(var) {
            Some(Term::Iri(i)) if state.catalog.contains_key(i) => Some(i.clone()),
            _ => None,
        })
        .collect();
    found.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingDelivery {
    pub node: String,
    /// Sum of link latencies on the node's root path.
    pub delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSchedule {
    pub tick: u64,
    /// Breadth-first from the coordinator.
    pub deliveries: Vec<TimingDelivery>,
}

impl TimingSchedule {
    pub fn delay_of(&self, node: &str) -> Option<f64> {
        self.deliveries
            .iter()
            .find(|d| d.node == node)
            .map(|d| d.delay_ms)
    }
}

/// When each node receives timing tick `tick`, relative to its emission at
/// the root. A node forwards the tick to its children on receipt.
pub fn propagate_timing(state: &SwarmState, tick: u64) -> TimingSchedule {
    let mut delay: BTreeMap<String, f64> = BTreeMap::new();
    let mut deliveries = Vec::new();
    for n in state.bfs() {
        let d = match state.parent(&n) {
            None => 0.0,
            Some(p) => delay[p] + state.members[&n].link_ms,
        };
        delay.insert(n.clone(), d);
        deliveries.push(TimingDelivery { node: n, delay_ms: d });
    }
    TimingSchedule { tick, deliveries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::StreamDescriptor;

    fn cam(id: &str, uri: &str) -> NodeDescriptor {
        NodeDescriptor::new(id, NodeKind::Rsu).with_stream(StreamDescriptor {
            name: "status".into(),
            uri: Iri::new(uri),
            description: String::new(),
            content_type: "application/mp4".into(),
            method_name: "RTSP".into(),
            provenance: Vec::new(),
        })
    }

    fn small() -> SwarmState {
        let mut s = SwarmState::new(NodeDescriptor::new("cloud", NodeKind::Cloud)).unwrap();
        s.subscribe(NodeDescriptor::new("edge", NodeKind::Edge), "cloud").unwrap();
        s
    }

    #[test]
    fn subscribe_grows_catalog() {
        let mut s = small();
        let ack = s.subscribe(cam("rsu2", "RTSP://helsinki.fi/camera/2"), "edge").unwrap();
        assert_eq!(ack.parent, "edge");
        assert_eq!(s.len(), 3);
        assert!(s.catalog().contains_key(&Iri::new("RTSP://helsinki.fi/camera/2")));
        assert_eq!(s.subtree_streams("edge").len(), 1);
        assert_eq!(s.member("rsu2").unwrap().role, Role::Source);
        s.check_tree().unwrap();
    }

    #[test]
    fn subscribe_errors_leave_state_alone() {
        let mut s = small();
        let before = s.clone();
        assert!(matches!(s.subscribe(cam("x", "u:1"), "x"), Err(SwarmError::Cycle { .. })));
        assert!(matches!(s.subscribe(cam("edge", "u:1"), "cloud"), Err(SwarmError::DuplicateId(_))));
        assert!(matches!(s.subscribe(cam("y", "u:1"), "nowhere"), Err(SwarmError::UnknownNode(_))));
        assert_eq!(s, before);
        s.subscribe(cam("a", "u:1"), "edge").unwrap();
        let before = s.clone();
        assert!(matches!(s.subscribe(cam("b", "u:1"), "edge"), Err(SwarmError::DuplicateStream(_))));
        assert_eq!(s, before);
    }

    #[test]
    fn leaving_reparents_children() {
        let mut s = small();
        s.subscribe(cam("a", "u:1"), "edge").unwrap();
        s.subscribe(cam("b", "u:2"), "edge").unwrap();
        s.unsubscribe("edge").unwrap();
        assert_eq!(s.parent("a"), Some("cloud"));
        assert_eq!(s.children("cloud"), vec!["a", "b"]);
        assert_eq!(s.catalog().len(), 2);
        s.unsubscribe("a").unwrap();
        assert_eq!(s.catalog().len(), 1);
        assert!(matches!(s.unsubscribe("cloud"), Err(SwarmError::CoordinatorLeave)));
        s.check_tree().unwrap();
    }

    #[test]
    fn moving_under_a_descendant_is_a_cycle() {
        let mut s = small();
        s.subscribe(NodeDescriptor::new("edge2", NodeKind::Edge), "edge").unwrap();
        assert!(matches!(s.move_node("edge", "edge2"), Err(SwarmError::Cycle { .. })));
        s.move_node("edge2", "cloud").unwrap();
        s.check_tree().unwrap();
    }

    #[test]
    fn timing_sums_link_latencies() {
        let mut s = SwarmState::new(NodeDescriptor::new("root", NodeKind::Cloud)).unwrap();
        s.subscribe_with_latency(NodeDescriptor::new("e", NodeKind::Edge), "root", 5.0).unwrap();
        s.subscribe_with_latency(cam("r", "u:1"), "e", 10.0).unwrap();
        let t = propagate_timing(&s, 7);
        assert_eq!(t.tick, 7);
        assert_eq!(t.delay_of("root"), Some(0.0));
        assert_eq!(t.delay_of("r"), Some(15.0));
    }
}
