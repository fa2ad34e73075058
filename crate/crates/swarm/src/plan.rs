//! The adaptive federator's rewrite: a continuous query becomes a tree of
//! fragments placed on swarm nodes, with COUNT pushed to the leaves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thoth_core::query::{AggFunc, Aggregate, Pattern, Projection, Query, QueryForm, StreamSource};
use thoth_core::rdf::Iri;

use crate::state::{discover, SwarmState};
use crate::SwarmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentRole {
    /// Merges children and applies HAVING, ORDER BY and the projection.
    Root,
    /// Sums or concatenates child partials and forwards them.
    Merge,
    /// Evaluates the query body over local streams.
    Leaf,
}

impl fmt::Display for FragmentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentRole::Root => "root",
            FragmentRole::Merge => "merge",
            FragmentRole::Leaf => "leaf",
        })
    }
}

/// Per-group partial counts a leaf ships upward.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPartial {
    pub group_keys: Vec<String>,
    /// Distinct COUNT aggregates of the query, in first-use order.
    pub counts: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFragment {
    pub id: String,
    pub role: FragmentRole,
    pub placement: String,
    pub parent: Option<String>,
    /// Streams a leaf reads; for a centralized root, every matching stream.
    pub streams: Vec<Iri>,
    /// Leaf sub-query, or the whole query for a centralized root.
    pub subquery: Option<Query>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanMode {
    /// One fragment at the root evaluating everything.
    Centralized,
    Pushdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentPlan {
    pub query: Query,
    pub mode: PlanMode,
    /// `None` when rows, not counts, travel upward.
    pub partial: Option<CountPartial>,
    /// Root first, then merges, then leaves.
    pub fragments: Vec<QueryFragment>,
    /// Set when some stream had no processor on its root path, or the query
    /// could not be split.
    pub fallback: Option<String>,
}

impl FragmentPlan {
    pub fn root(&self) -> &QueryFragment {
        &self.fragments[0]
    }

    pub fn fragment(&self, id: &str) -> Option<&QueryFragment> {
        self.fragments.iter().find(|f| f.id == id)
    }

    pub fn children(&self, id: &str) -> Vec<&QueryFragment> {
        self.fragments
            .iter()
            .filter(|f| f.parent.as_deref() == Some(id))
            .collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &QueryFragment> {
        self.fragments.iter().filter(|f| f.role == FragmentRole::Leaf)
    }

    /// One line per fragment: `id role @node parent streams`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for f in &self.fragments {
            out.push_str(&format!(
                "{} {} @{} parent={} streams={}\n",
                f.id,
                f.role,
                f.placement,
                f.parent.as_deref().unwrap_or("-"),
                f.streams.len()
            ));
        }
        if let Some(r) = &self.fallback {
            out.push_str(&format!("fallback: {r}\n"));
        }
        out
    }
}

/// Variables of the only stream block's source, if the query has the shape
/// the federator can split: one positive stream block, NAF blocks reading
/// the same source.
fn split_source(q: &Query) -> Result<&StreamSource, String> {
    let [block] = q.stream_blocks.as_slice() else {
        return Err(format!("{} stream blocks; need exactly one", q.stream_blocks.len()));
    };
    if q.naf_blocks.iter().any(|n| n.source != block.source) {
        return Err("NAF block over a different stream".into());
    }
    Ok(&block.source)
}

fn count_partial(q: &Query) -> Result<Option<CountPartial>, SwarmError> {
    let aggs = q.aggregates();
    if aggs.is_empty() {
        return Ok(None);
    }
    let mut counts: Vec<Aggregate> = Vec::new();
    for a in aggs {
        if a.func != AggFunc::Count || a.distinct {
            let distinct = if a.distinct { "DISTINCT " } else { "" };
            return Err(SwarmError::UnsupportedAggregate(format!("{}({distinct}..)", a.func.name())));
        }
        if !counts.contains(a) {
            counts.push(a.clone());
        }
    }
    Ok(Some(CountPartial {
        group_keys: q.group_by.clone(),
        counts,
    }))
}

fn fresh_names(q: &Query, n: usize) -> Vec<String> {
    let mut taken: BTreeSet<String> = q.bound_vars().into_iter().collect();
    if let QueryForm::Select { projection } = &q.form {
        for p in projection {
            if let Projection::Aggregate { alias, .. } = p {
                taken.insert(alias.clone());
            }
        }
    }
    let mut stem = String::from("partial");
    while taken.iter().any(|t| t.starts_with(&stem)) {
        stem.push('_');
    }
    (0..n).map(|i| format!("{stem}{i}")).collect()
}

/// Variables the root needs from each leaf row when nothing is aggregated.
pub fn row_vars(q: &Query) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |v: &str| {
        if !out.iter().any(|o| o == v) {
            out.push(v.to_string());
        }
    };
    if let QueryForm::Select { projection } = &q.form {
        for p in projection {
            if let Projection::Var(v) = p {
                push(v);
            }
        }
    }
    for k in &q.order_by {
        for v in k.expr.vars() {
            push(v);
        }
    }
    out
}

/// The sub-query a leaf runs: the whole body, grouped by the query's keys
/// with one COUNT column per partial, or the needed variables row by row.
pub fn leaf_query(q: &Query, partial: Option<&CountPartial>) -> Query {
    let mut leaf = q.clone();
    leaf.having = None;
    leaf.order_by.clear();
    let projection = match partial {
        Some(p) => {
            let names = fresh_names(q, p.counts.len());
            p.group_keys
                .iter()
                .map(|k| Projection::Var(k.clone()))
                .chain(p.counts.iter().zip(names).map(|(a, alias)| Projection::Aggregate {
                    agg: a.clone(),
                    alias,
                }))
                .collect()
        }
        None => row_vars(q).into_iter().map(Projection::Var).collect(),
    };
    leaf.form = QueryForm::Select { projection };
    leaf
}

/// Splits `q` into fragments over the swarm.
pub fn rewrite(q: &Query, state: &SwarmState) -> Result<FragmentPlan, SwarmError> {
    let QueryForm::Select { .. } = &q.form else {
        return Err(SwarmError::NotSelect);
    };
    let partial = count_partial(q)?;
    let root_id = state.coordinator.clone();

    let centralized = |streams: Vec<Iri>, fallback: Option<String>| FragmentPlan {
        query: q.clone(),
        mode: PlanMode::Centralized,
        partial: partial.clone(),
        fragments: vec![QueryFragment {
            id: "f0".into(),
            role: FragmentRole::Root,
            placement: root_id.clone(),
            parent: None,
            streams,
            subquery: Some(q.clone()),
        }],
        fallback,
    };

    let source = match split_source(q) {
        Ok(s) => s,
        Err(why) => {
            let all = state.catalog().keys().cloned().collect();
            return Ok(centralized(all, Some(why)));
        }
    };
    let streams: Vec<Iri> = match source {
        StreamSource::Iri(i) => state.catalog().contains_key(i).then(|| i.clone()).into_iter().collect(),
        StreamSource::Var(v) => {
            let pinning: Vec<Pattern> = q
                .static_patterns
                .iter()
                .filter(|p| p.vars().contains(&v.as_str()))
                .cloned()
                .collect();
            discover(state, &pinning, v)
        }
    };

    let mut fallback = None;
    let mut by_node: BTreeMap<String, Vec<Iri>> = BTreeMap::new();
    for s in &streams {
        let owner = &state.catalog()[s].owner;
        let node = match state.lowest_processor(owner) {
            Some(n) => n,
            None => {
                fallback = Some(format!("no processor above {owner}; placed at the root"));
                root_id.clone()
            }
        };
        by_node.entry(node).or_default().push(s.clone());
    }
    if by_node.keys().all(|n| *n == root_id) {
        return Ok(centralized(streams, fallback));
    }

    // Merge fragments sit at processors where two or more fragment-bearing
    // branches meet.
    let order = state.bfs();
    let placed: BTreeSet<&String> = by_node.keys().collect();
    let carries = |n: &str| placed.iter().any(|p| state.path_to_root(p).iter().any(|x| x == n));
    let mut merges: Vec<String> = Vec::new();
    for n in &order {
        if *n == root_id || !state.member(n).is_some_and(|m| m.descriptor.capabilities.reasoner) {
            continue;
        }
        let branches = usize::from(placed.contains(n))
            + state.children(n).iter().filter(|c| carries(c)).count();
        if branches >= 2 {
            merges.push(n.clone());
        }
    }

    let mut fragments = vec![QueryFragment {
        id: "f0".into(),
        role: FragmentRole::Root,
        placement: root_id.clone(),
        parent: None,
        streams: Vec::new(),
        subquery: None,
    }];
    let mut merge_ids: BTreeMap<String, String> = BTreeMap::new();
    for m in &merges {
        let id = format!("f{}", fragments.len());
        merge_ids.insert(m.clone(), id.clone());
        fragments.push(QueryFragment {
            id,
            role: FragmentRole::Merge,
            placement: m.clone(),
            parent: None,
            streams: Vec::new(),
            subquery: None,
        });
    }
    // Nearest merge strictly above a node, else the root.
    let above = |n: &str| {
        state.path_to_root(n)[1..]
            .iter()
            .find_map(|a| merge_ids.get(a).cloned())
            .unwrap_or_else(|| "f0".into())
    };
    for f in fragments.iter_mut().skip(1) {
        f.parent = Some(above(&f.placement));
    }
    let leaf_q = leaf_query(q, partial.as_ref());
    for n in order.iter().filter(|n| by_node.contains_key(*n)) {
        let parent = merge_ids.get(n).cloned().unwrap_or_else(|| above(n));
        fragments.push(QueryFragment {
            id: format!("f{}", fragments.len()),
            role: FragmentRole::Leaf,
            placement: n.clone(),
            parent: Some(parent),
            streams: by_node[n].clone(),
            subquery: Some(leaf_q.clone()),
        });
    }
    Ok(FragmentPlan {
        query: q.clone(),
        mode: PlanMode::Pushdown,
        partial,
        fragments,
        fallback,
    })
}
