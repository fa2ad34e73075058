//! Fragment evaluation, partial merging and a message-driven federated run.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use thoth_core::query::{format_errors, parse_query, serialize_query, Projection, Query, QueryForm};
use thoth_core::rdf::{Binding, KnowledgeGraph, Term};
use thoth_core::reason::{agg_key, evaluate_select, finish_groups, EvalContext, GroupRow, SelectResult, StreamSet, Value};

use crate::plan::{row_vars, FragmentPlan, FragmentRole, PlanMode};
use crate::state::SwarmState;
use crate::wire::{Envelope, Message, Transport};
use crate::SwarmError;

pub type GroupKey = Vec<Option<Term>>;

#[derive(Debug, Clone, PartialEq)]
pub enum PartialPayload {
    /// Group key (first `keys` columns) to one count per partial aggregate.
    Counts {
        keys: usize,
        groups: BTreeMap<GroupKey, Vec<u64>>,
    },
    Rows(Vec<Vec<Option<Term>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialResult {
    pub fragment_id: String,
    pub payload: PartialPayload,
    pub watermark: u64,
}

/// Static knowledge plus the metadata of every stream: what any fragment
/// may consult besides its own windows.
pub fn knowledge(streams: &StreamSet, graph: &KnowledgeGraph) -> KnowledgeGraph {
    let mut g = graph.clone();
    for s in streams.values() {
        g.extend(s.metadata.iter().cloned());
    }
    g
}

/// The unfragmented query over every stream.
pub fn centralized_select(q: &Query, streams: &StreamSet, graph: &KnowledgeGraph, now: u64, tick_ms: u64) -> SelectResult {
    let ctx = EvalContext::new(streams, graph, now, tick_ms);
    evaluate_select(q, &ctx)
}

fn subset(streams: &StreamSet, uris: &[thoth_core::rdf::Iri]) -> StreamSet {
    uris.iter()
        .filter_map(|u| streams.get(u).map(|s| (u.clone(), s.clone())))
        .collect()
}

/// Runs a leaf sub-query over its own streams.
pub fn evaluate_leaf(
    fragment_id: &str,
    subquery: &Query,
    counts_width: Option<usize>,
    local: &StreamSet,
    knowledge: &KnowledgeGraph,
    now: u64,
    tick_ms: u64,
) -> PartialResult {
    let ctx = EvalContext::new(local, knowledge, now, tick_ms);
    let res = evaluate_select(subquery, &ctx);
    let payload = match counts_width {
        Some(keys) => {
            let mut groups = BTreeMap::new();
            for row in res.rows {
                let counts = row[keys..]
                    .iter()
                    .map(|c| c.as_ref().and_then(Term::as_f64).map_or(0, |x| x as u64))
                    .collect();
                groups.insert(row[..keys].to_vec(), counts);
            }
            PartialPayload::Counts { keys, groups }
        }
        None => PartialPayload::Rows(res.rows),
    };
    PartialResult {
        fragment_id: fragment_id.into(),
        payload,
        watermark: now,
    }
}

fn check_watermarks(partials: &[PartialResult]) -> Result<Option<u64>, SwarmError> {
    let Some(first) = partials.first() else {
        return Ok(None);
    };
    for p in partials {
        if p.watermark != first.watermark {
            return Err(SwarmError::WatermarkMismatch {
                fragment: p.fragment_id.clone(),
                expected: first.watermark,
                got: p.watermark,
            });
        }
    }
    Ok(Some(first.watermark))
}

/// Sums counts (or concatenates rows) of same-watermark partials into one
/// partial for `fragment_id`.
pub fn combine(fragment_id: &str, partials: &[PartialResult]) -> Result<PartialResult, SwarmError> {
    let watermark = check_watermarks(partials)?.unwrap_or(0);
    let mut counts: Option<(usize, BTreeMap<GroupKey, Vec<u64>>)> = None;
    let mut rows = Vec::new();
    for p in partials {
        match &p.payload {
            PartialPayload::Counts { keys, groups } => {
                let (_, acc) = counts.get_or_insert_with(|| (*keys, BTreeMap::new()));
                for (k, c) in groups {
                    let slot = acc.entry(k.clone()).or_insert_with(|| vec![0; c.len()]);
                    if slot.len() != c.len() {
                        return Err(SwarmError::Partial(format!("{}: count width changed", p.fragment_id)));
                    }
                    for (s, x) in slot.iter_mut().zip(c) {
                        *s += x;
                    }
                }
            }
            PartialPayload::Rows(r) => rows.extend(r.iter().cloned()),
        }
    }
    if counts.is_some() && !rows.is_empty() {
        return Err(SwarmError::Partial("counts mixed with rows".into()));
    }
    let payload = match counts {
        Some((keys, groups)) => PartialPayload::Counts { keys, groups },
        None => PartialPayload::Rows(rows),
    };
    Ok(PartialResult {
        fragment_id: fragment_id.into(),
        payload,
        watermark,
    })
}

/// Final step at the root: sum partials per group, then HAVING, ORDER BY
/// (ties by group key) and projection as in centralized evaluation.
pub fn merge_partials(plan: &FragmentPlan, partials: &[PartialResult]) -> Result<SelectResult, SwarmError> {
    let merged = combine("f0", partials)?;
    let q = &plan.query;
    let groups = match (&plan.partial, merged.payload) {
        (Some(cp), PartialPayload::Counts { groups, .. }) => groups
            .into_iter()
            .map(|(key, counts)| {
                let mut env = Binding::new();
                for (v, t) in cp.group_keys.iter().zip(&key) {
                    if let Some(t) = t {
                        env.insert(v.clone(), t.clone());
                    }
                }
                let aggregates = cp
                    .counts
                    .iter()
                    .zip(counts)
                    .map(|(a, c)| (agg_key(a), Value::Num(c as f64)))
                    .collect();
                GroupRow { key, env, aggregates }
            })
            .collect(),
        (Some(_), PartialPayload::Rows(r)) if r.is_empty() => Vec::new(),
        (None, PartialPayload::Rows(rows)) => {
            let shipped = row_vars(q);
            let projected: Vec<usize> = match &q.form {
                QueryForm::Select { projection } => projection
                    .iter()
                    .filter_map(|p| match p {
                        Projection::Var(v) => shipped.iter().position(|s| s == v),
                        Projection::Aggregate { .. } => None,
                    })
                    .collect(),
                QueryForm::Construct { .. } => Vec::new(),
            };
            rows.into_iter()
                .map(|r| {
                    let mut env = Binding::new();
                    for (v, t) in shipped.iter().zip(&r) {
                        if let Some(t) = t {
                            env.insert(v.clone(), t.clone());
                        }
                    }
                    GroupRow {
                        key: projected.iter().map(|&i| r[i].clone()).collect(),
                        env,
                        aggregates: BTreeMap::new(),
                    }
                })
                .collect()
        }
        _ => return Err(SwarmError::Partial("partials do not match the plan".into())),
    };
    Ok(finish_groups(q, groups))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Tick { node: String, tick: u64 },
    Evaluate { node: String, fragment: String, tick: u64 },
    Merge { node: String, fragment: String, tick: u64 },
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub result: SelectResult,
    pub trace: Vec<TraceEvent>,
    pub messages: usize,
}

struct Deployed {
    role: FragmentRole,
    parent: Option<String>,
    parent_node: Option<String>,
    children: usize,
    streams: Vec<thoth_core::rdf::Iri>,
    query: Option<Query>,
    inbox: Vec<PartialResult>,
}

#[derive(Default)]
struct NodeActor {
    fragments: BTreeMap<String, Deployed>,
    last_tick: Option<u64>,
}

/// Deploys `plan`, emits timing tick `now` at the coordinator and runs every
/// node until the root has its answer. All traffic goes through `net`.
#[allow(clippy::too_many_arguments)]
pub fn run_federated(
    plan: &FragmentPlan,
    state: &SwarmState,
    streams: &StreamSet,
    graph: &KnowledgeGraph,
    now: u64,
    tick_ms: u64,
    net: &mut dyn Transport,
) -> Result<FederatedRun, SwarmError> {
    let root = state.coordinator.clone();
    let know = knowledge(streams, graph);
    let counts_width = plan.partial.as_ref().map(|p| p.group_keys.len());
    let mut sent = 0usize;
    let mut send = |net: &mut dyn Transport, from: &str, to: &str, message: Message| -> Result<(), SwarmError> {
        sent += 1;
        net.send(&Envelope {
            from: from.into(),
            to: to.into(),
            message,
        })
        .map_err(SwarmError::from)
    };

    for f in &plan.fragments {
        let children = plan.children(&f.id).len();
        let parent_node = f
            .parent
            .as_ref()
            .and_then(|p| plan.fragment(p))
            .map(|p| p.placement.clone());
        let msg = Message::SubQuery {
            fragment: f.id.clone(),
            role: f.role,
            parent: f.parent.clone(),
            parent_node,
            children,
            streams: f.streams.clone(),
            query: f.subquery.as_ref().map(serialize_query).unwrap_or_default(),
        };
        send(net, &root, &f.placement, msg)?;
    }
    send(net, &root, &root, Message::Tick { tick: now })?;

    let mut actors: BTreeMap<String, NodeActor> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut result = None;
    while let Some(env) = net.recv()? {
        let node = env.to.clone();
        if state.member(&node).is_none() {
            return Err(SwarmError::UnknownNode(node));
        }
        let actor = actors.entry(node.clone()).or_default();
        match env.message {
            Message::SubQuery {
                fragment,
                role,
                parent,
                parent_node,
                children,
                streams,
                query,
            } => {
                let query = if query.trim().is_empty() {
                    None
                } else {
                    Some(parse_query(&query).map_err(|e| SwarmError::Partial(format!("{fragment}: {}", format_errors(&e))))?)
                };
                actor.fragments.insert(
                    fragment,
                    Deployed {
                        role,
                        parent,
                        parent_node,
                        children,
                        streams,
                        query,
                        inbox: Vec::new(),
                    },
                );
            }
            Message::Tick { tick } => {
                if actor.last_tick.is_some_and(|t| tick < t) {
                    return Err(SwarmError::StaleTick { node, tick });
                }
                actor.last_tick = Some(tick);
                trace.push(TraceEvent::Tick { node: node.clone(), tick });
                for c in state.children(&node) {
                    send(net, &node, &c, Message::Tick { tick })?;
                }
                let mut out = Vec::new();
                for (id, d) in &actor.fragments {
                    let Some(q) = &d.query else { continue };
                    trace.push(TraceEvent::Evaluate {
                        node: node.clone(),
                        fragment: id.clone(),
                        tick,
                    });
                    let local = subset(streams, &d.streams);
                    match d.role {
                        FragmentRole::Root => {
                            let ctx = EvalContext::new(&local, &know, tick, tick_ms);
                            result = Some(evaluate_select(q, &ctx));
                        }
                        _ => {
                            let p = evaluate_leaf(id, q, counts_width, &local, &know, tick, tick_ms);
                            let to = d.parent_node.clone().unwrap_or_else(|| root.clone());
                            let target = d.parent.clone().unwrap_or_else(|| "f0".into());
                            out.push((to, Message::Partial { target, partial: p }));
                        }
                    }
                }
                for (to, m) in out {
                    send(net, &node, &to, m)?;
                }
            }
            Message::Partial { target, partial } => {
                let d = actor
                    .fragments
                    .get_mut(&target)
                    .ok_or_else(|| SwarmError::Partial(format!("{node} has no fragment {target}")))?;
                d.inbox.push(partial);
                if d.inbox.len() < d.children {
                    continue;
                }
                let inbox = std::mem::take(&mut d.inbox);
                let tick = inbox[0].watermark;
                trace.push(TraceEvent::Merge {
                    node: node.clone(),
                    fragment: target.clone(),
                    tick,
                });
                match d.role {
                    FragmentRole::Root => result = Some(merge_partials(plan, &inbox)?),
                    _ => {
                        let merged = combine(&target, &inbox)?;
                        let to = d.parent_node.clone().unwrap_or_else(|| root.clone());
                        let up = d.parent.clone().unwrap_or_else(|| "f0".into());
                        send(net, &node, &to, Message::Partial { target: up, partial: merged })?;
                    }
                }
            }
            other => debug!("{node} ignores {}", other.kind()),
        }
    }
    let result = result.ok_or(SwarmError::Incomplete)?;
    Ok(FederatedRun {
        result,
        trace,
        messages: sent,
    })
}

/// Convenience: rewrite, run over an in-process network, and compare with
/// the centralized answer.
pub fn check_against_centralized(
    q: &Query,
    state: &SwarmState,
    streams: &StreamSet,
    graph: &KnowledgeGraph,
    now: u64,
    tick_ms: u64,
) -> Result<(FragmentPlan, FederatedRun, SelectResult), SwarmError> {
    let plan = crate::plan::rewrite(q, state)?;
    let mut net = crate::wire::InProcessNetwork::new();
    let run = run_federated(&plan, state, streams, graph, now, tick_ms, &mut net)?;
    let central = centralized_select(q, streams, graph, now, tick_ms);
    Ok((plan, run, central))
}

/// Stream URIs mentioned anywhere in a plan's leaves.
pub fn leaf_streams(plan: &FragmentPlan) -> BTreeSet<thoth_core::rdf::Iri> {
    if plan.mode == PlanMode::Centralized {
        return plan.root().streams.iter().cloned().collect();
    }
    plan.leaves().flat_map(|f| f.streams.iter().cloned()).collect()
}
