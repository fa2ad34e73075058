//! Body evaluation by nested-loop join over stream windows and the static
//! graph, and instantiation of rule heads.

use std::cell::OnceCell;
use std::collections::{BTreeMap, BTreeSet};

use log::debug;

use super::eval::{boolean, Env, Features};
use crate::query::{Expr, Pattern, Predicate, Query, Rule, StreamBlock, StreamSource, Window};
use crate::rdf::graph::{sort_dedup, unify, unify_triple};
use crate::rdf::{Binding, Iri, KnowledgeGraph, SemanticStream, Term, TimedTriple, Triple};

/// Named input streams.
pub type StreamSet = BTreeMap<Iri, SemanticStream>;

/// A head instance proposed by one grounding of one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFact {
    pub triple: Triple,
    pub timestamp: u64,
    pub rule_id: Iri,
    /// The rule's weight; `f64::INFINITY` for hard rules.
    pub weight: f64,
    pub binding: Binding,
}

impl CandidateFact {
    pub fn is_hard(&self) -> bool {
        self.weight.is_infinite()
    }
}

/// Everything one evaluation at tick `now` can see.
pub struct EvalContext<'a> {
    pub streams: &'a StreamSet,
    /// Static graph plus the metadata of every stream.
    graph: KnowledgeGraph,
    pub now: u64,
    pub tick_ms: u64,
    features: OnceCell<Features>,
}

impl<'a> EvalContext<'a> {
    pub fn new(streams: &'a StreamSet, graph: &KnowledgeGraph, now: u64, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick length must be positive");
        let mut g = graph.clone();
        for s in streams.values() {
            g.extend(s.metadata.iter().cloned());
        }
        EvalContext {
            streams,
            graph: g,
            now,
            tick_ms,
            features: OnceCell::new(),
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    /// Geometry for the builtins: the static graph, then every stream
    /// element up to `now` in time order.
    pub fn features(&self) -> &Features {
        self.features.get_or_init(|| {
            let mut f = Features::new();
            f.add(self.graph.iter());
            let mut elems: Vec<&TimedTriple> = self
                .streams
                .values()
                .flat_map(|s| s.elements().iter())
                .filter(|e| e.timestamp <= self.now)
                .collect();
            elems.sort_by_key(|e| e.timestamp);
            f.add(elems.into_iter().map(|e| &e.triple));
            f
        })
    }

    /// Width of a window in ticks; no window means the current tick.
    pub fn window_ticks(&self, w: Option<&Window>) -> u64 {
        match w {
            None => 1,
            Some(w) => w.width_ms.div_ceil(self.tick_ms).max(1),
        }
    }

    fn window(&self, stream: &Iri, w: Option<&Window>) -> &'a [TimedTriple] {
        match self.streams.get(stream) {
            Some(s) => s.window(self.now, self.window_ticks(w)),
            None => &[],
        }
    }
}

/// Matches one pattern against a set of triples, extending `seed`.
fn match_pattern<'t, I>(p: &Pattern, data: I, seed: &Binding, out: &mut Vec<Binding>)
where
    I: Iterator<Item = (&'t Triple, Option<u64>)> + Clone,
{
    let bind_time = |b: &mut Binding, var: Option<&str>, ts: Option<u64>| match (var, ts) {
        (None, _) => true,
        (Some(v), Some(ts)) => unify(&Term::var(v), &Term::integer(ts as i64), b),
        (Some(_), None) => false,
    };
    match p {
        Pattern::Triple(tp) => match &tp.predicate {
            Predicate::Term(pred) => {
                for (t, ts) in data {
                    let mut b = seed.clone();
                    if unify(&tp.subject, &t.subject, &mut b)
                        && unify(pred, &t.predicate, &mut b)
                        && unify(&tp.object, &t.object, &mut b)
                        && bind_time(&mut b, tp.time.as_deref(), ts)
                    {
                        out.push(b);
                    }
                }
            }
            Predicate::Sequence(steps) => {
                // Walk the path one step at a time; intermediate nodes stay
                // out of the binding.
                let mut frontier: Vec<(Binding, Term, Option<u64>)> =
                    vec![(seed.clone(), tp.subject.clone(), None)];
                for (i, step) in steps.iter().enumerate() {
                    let last = i + 1 == steps.len();
                    let step = Term::Iri(step.clone());
                    let mut next = Vec::new();
                    for (b, subj, _) in &frontier {
                        for (t, ts) in data.clone() {
                            if t.predicate != step {
                                continue;
                            }
                            let mut b2 = b.clone();
                            if !unify(subj, &t.subject, &mut b2) {
                                continue;
                            }
                            if last && !unify(&tp.object, &t.object, &mut b2) {
                                continue;
                            }
                            next.push((b2, t.object.clone(), ts));
                        }
                    }
                    frontier = next;
                }
                for (mut b, _, ts) in frontier {
                    if bind_time(&mut b, tp.time.as_deref(), ts) {
                        out.push(b);
                    }
                }
            }
        },
        Pattern::Occurrence { triple, time } => {
            for (t, ts) in data {
                let mut b = seed.clone();
                if unify_triple(triple, t, &mut b) && bind_time(&mut b, Some(time), ts) {
                    out.push(b);
                }
                if let Term::Quoted(q) = &t.subject {
                    let mut b = seed.clone();
                    if unify_triple(triple, q, &mut b) && bind_time(&mut b, Some(time), ts) {
                        out.push(b);
                    }
                }
            }
        }
    }
}

fn join<'t, I>(rows: Vec<Binding>, p: &Pattern, data: I) -> Vec<Binding>
where
    I: Iterator<Item = (&'t Triple, Option<u64>)> + Clone,
{
    let mut out = Vec::new();
    for r in &rows {
        match_pattern(p, data.clone(), r, &mut out);
    }
    sort_dedup(&mut out);
    out
}

fn join_static(rows: Vec<Binding>, p: &Pattern, g: &KnowledgeGraph) -> Vec<Binding> {
    join(rows, p, g.iter().map(|t| (t, None)))
}

fn block_sources(ctx: &EvalContext, b: &StreamBlock, row: &Binding) -> Vec<(Iri, Option<String>)> {
    match &b.source {
        StreamSource::Iri(i) => vec![(i.clone(), None)],
        StreamSource::Var(v) => match row.get(v) {
            Some(Term::Iri(i)) => vec![(i.clone(), None)],
            Some(_) => Vec::new(),
            None => ctx.streams.keys().map(|i| (i.clone(), Some(v.clone()))).collect(),
        },
    }
}

/// All extensions of `row` that match every pattern of `b` in its window.
fn block_matches(ctx: &EvalContext, b: &StreamBlock, row: &Binding) -> Vec<Binding> {
    let mut out = Vec::new();
    for (stream, bind) in block_sources(ctx, b, row) {
        let mut seed = row.clone();
        if let Some(v) = bind {
            seed.insert(v, Term::Iri(stream.clone()));
        }
        let elems = ctx.window(&stream, b.window.as_ref());
        let data = elems.iter().map(|e| (&e.triple, Some(e.timestamp)));
        let mut rows = vec![seed];
        for p in &b.patterns {
            rows = join(rows, p, data.clone());
            if rows.is_empty() {
                break;
            }
        }
        out.extend(rows);
    }
    sort_dedup(&mut out);
    out
}

fn passes(filters: &[&Expr], row: &Binding, features: &Features) -> bool {
    let env = Env::new(row, features);
    filters.iter().all(|f| match boolean(f, &env) {
        Ok(b) => b,
        Err(e) => {
            debug!("binding {row} dropped: {e}");
            false
        }
    })
}

fn uses_builtins(q: &Query) -> bool {
    let blocks = q.stream_blocks.iter().chain(&q.naf_blocks);
    q.filters
        .iter()
        .chain(blocks.flat_map(|b| b.filters.iter()))
        .any(|f| !f.calls().is_empty())
}

/// Solutions of a query body at `ctx.now`: positive joins, then filters,
/// then NAF. Sorted and duplicate-free.
pub fn solutions(q: &Query, ctx: &EvalContext) -> Vec<Binding> {
    let source_vars: BTreeSet<&str> = q
        .stream_blocks
        .iter()
        .filter_map(|b| match &b.source {
            StreamSource::Var(v) => Some(v.as_str()),
            StreamSource::Iri(_) => None,
        })
        .collect();
    // Static patterns that pin a stream variable run first, so variable
    // sources only visit the streams they select.
    let (early, late): (Vec<&Pattern>, Vec<&Pattern>) = q
        .static_patterns
        .iter()
        .partition(|p| p.vars().iter().any(|v| source_vars.contains(v)));

    let mut rows = vec![Binding::new()];
    for p in early {
        rows = join_static(rows, p, ctx.graph());
    }
    for b in &q.stream_blocks {
        let mut next = Vec::new();
        for r in &rows {
            next.extend(block_matches(ctx, b, r));
        }
        sort_dedup(&mut next);
        rows = next;
    }
    for p in late {
        rows = join_static(rows, p, ctx.graph());
    }

    let filters: Vec<&Expr> = q
        .stream_blocks
        .iter()
        .flat_map(|b| b.filters.iter())
        .chain(&q.filters)
        .collect();
    if !filters.is_empty() && !rows.is_empty() {
        let empty = Features::new();
        let features = if uses_builtins(q) { ctx.features() } else { &empty };
        rows.retain(|r| passes(&filters, r, features));
    }

    for naf in &q.naf_blocks {
        let nf: Vec<&Expr> = naf.filters.iter().collect();
        rows.retain(|r| {
            let m = block_matches(ctx, naf, r);
            !m.iter().any(|x| nf.is_empty() || passes(&nf, x, ctx.features()))
        });
    }
    rows
}

fn head_instance(p: &Pattern, b: &Binding, now: u64) -> Option<(Triple, u64)> {
    let (triple, time) = match p {
        Pattern::Triple(tp) => {
            let pred = match &tp.predicate {
                Predicate::Term(t) => t.clone(),
                Predicate::Sequence(_) => return None,
            };
            (
                Triple::new(tp.subject.clone(), pred, tp.object.clone()),
                tp.time.as_deref(),
            )
        }
        Pattern::Occurrence { triple, time } => (triple.clone(), Some(time.as_str())),
    };
    let t = b.apply_triple(&triple);
    if !t.is_ground() {
        return None;
    }
    let ts = match time {
        None => now,
        Some(v) => {
            let x = b.get(v)?.as_f64()?;
            if x < 0.0 || x.fract() != 0.0 {
                return None;
            }
            x as u64
        }
    };
    Some((t, ts))
}

/// One candidate per head pattern per solution, deduplicated per
/// (triple, timestamp) keeping the first solution in binding order.
pub fn ground(rule: &Rule, ctx: &EvalContext) -> Vec<CandidateFact> {
    let weight = rule.weight().unwrap_or(f64::INFINITY);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for b in solutions(&rule.query, ctx) {
        for h in rule.head() {
            match head_instance(h, &b, ctx.now) {
                Some((triple, ts)) => {
                    if seen.insert((triple.clone(), ts)) {
                        out.push(CandidateFact {
                            triple,
                            timestamp: ts,
                            rule_id: rule.id.clone(),
                            weight,
                            binding: b.clone(),
                        });
                    }
                }
                None => debug!("rule {} head {h:?} not instantiable under {b}", rule.id),
            }
        }
    }
    out.sort_by(|a, b| {
        (a.triple.to_string(), a.timestamp).cmp(&(b.triple.to_string(), b.timestamp))
    });
    out
}

/// Groups timed statements by stream. Elements are stably sorted by
/// timestamp first, so documents may list ticks in any order.
pub fn stream_set(statements: &[crate::rdf::StreamStatement]) -> Result<StreamSet, crate::rdf::StreamError> {
    let mut sorted: Vec<&crate::rdf::StreamStatement> = statements.iter().collect();
    sorted.sort_by_key(|s| s.element.timestamp);
    let mut out = StreamSet::new();
    for s in sorted {
        out.entry(s.stream.clone())
            .or_insert_with(|| SemanticStream::new(s.stream.clone()))
            .push(s.element.clone())?;
    }
    Ok(out)
}
