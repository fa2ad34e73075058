//! Static checks run after parsing.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::error::QueryError;
use crate::lexer::Position;

/// Builtin functions and their arities.
pub const BUILTINS: &[(&str, usize)] = &[("iou", 2), ("appDist", 2)];

/// Source positions collected by the parser.
#[derive(Debug, Clone, Default)]
pub struct Positions {
    /// First occurrence of each variable.
    pub vars: HashMap<String, Position>,
    /// Aggregates in source order.
    pub aggregates: Vec<Position>,
    /// First call of each function name.
    pub calls: HashMap<String, Position>,
    pub having: Option<Position>,
}

impl Positions {
    fn var(&self, v: &str) -> Position {
        self.vars.get(v).copied().unwrap_or(Position { line: 1, col: 1 })
    }
}

pub fn validate(q: &Query, pos: &Positions) -> Vec<QueryError> {
    let mut errs = Vec::new();
    let bound: BTreeSet<String> = q.bound_vars().into_iter().collect();
    let origin = Position { line: 1, col: 1 };
    let unbound = |v: &str, what: &str, errs: &mut Vec<QueryError>| {
        if !bound.contains(v) {
            errs.push(QueryError::validation(
                format!("variable ?{v} in {what} is not bound by any pattern"),
                pos.var(v),
            ));
        }
    };

    let aggs = q.aggregates();
    let mut aliases = BTreeSet::new();
    match &q.form {
        QueryForm::Select { projection } => {
            for p in projection {
                match p {
                    Projection::Var(v) => {
                        unbound(v, "projection", &mut errs);
                        if !q.group_by.is_empty() && !q.group_by.contains(v) && bound.contains(v) {
                            errs.push(QueryError::validation(
                                format!("projected ?{v} is not a GROUP BY key"),
                                pos.var(v),
                            ));
                        }
                    }
                    Projection::Aggregate { agg, alias } => {
                        if let Some(a) = &agg.arg {
                            unbound(a, "aggregate", &mut errs);
                        }
                        if bound.contains(alias) || !aliases.insert(alias.clone()) {
                            errs.push(QueryError::validation(
                                format!("alias ?{alias} is already in use"),
                                pos.var(alias),
                            ));
                        }
                    }
                }
            }
            if !aggs.is_empty() && q.group_by.is_empty() {
                errs.push(QueryError::validation(
                    "aggregates require GROUP BY",
                    pos.aggregates.first().copied().unwrap_or(origin),
                ));
            }
        }
        QueryForm::Construct { template } => {
            for p in template {
                if let Pattern::Triple(t) = p {
                    if matches!(t.predicate, Predicate::Sequence(_)) {
                        errs.push(QueryError::validation("property paths are not allowed in templates", origin));
                    }
                }
                for v in p.vars() {
                    unbound(v, "template", &mut errs);
                }
            }
            if !aggs.is_empty() || !q.group_by.is_empty() {
                errs.push(QueryError::validation(
                    "aggregates and GROUP BY are only allowed in SELECT",
                    pos.aggregates.first().copied().unwrap_or(origin),
                ));
            }
        }
    }

    for v in &q.group_by {
        unbound(v, "GROUP BY", &mut errs);
    }
    if q.having.is_some() && q.group_by.is_empty() {
        errs.push(QueryError::validation(
            "HAVING requires GROUP BY",
            pos.having.unwrap_or(origin),
        ));
    }
    if let Some(h) = &q.having {
        for v in h.vars() {
            if !aliases.contains(v) {
                unbound(v, "HAVING", &mut errs);
            }
        }
    }
    for k in &q.order_by {
        for v in k.expr.vars() {
            if !aliases.contains(v) {
                unbound(v, "ORDER BY", &mut errs);
            }
        }
    }

    let mut all_filters: Vec<&Expr> = q.filters.iter().collect();
    for b in &q.stream_blocks {
        all_filters.extend(&b.filters);
    }
    for e in &all_filters {
        for v in e.vars() {
            unbound(v, "FILTER", &mut errs);
        }
    }
    for b in &q.naf_blocks {
        let mut local: BTreeSet<&str> = BTreeSet::new();
        for p in &b.patterns {
            local.extend(p.vars());
        }
        if let StreamSource::Var(v) = &b.source {
            unbound(v, "NAF stream source", &mut errs);
        }
        for f in &b.filters {
            for v in f.vars() {
                if !local.contains(v) {
                    unbound(v, "NAF FILTER", &mut errs);
                }
            }
        }
    }
    for e in all_filters
        .iter()
        .copied()
        .chain(q.naf_blocks.iter().flat_map(|b| &b.filters))
    {
        let mut inner = Vec::new();
        e.collect_aggregates(&mut inner);
        if !inner.is_empty() {
            errs.push(QueryError::validation(
                "aggregates are not allowed in FILTER",
                pos.aggregates.first().copied().unwrap_or(origin),
            ));
        }
    }

    // Every call anywhere must be a known builtin with the right arity.
    let mut exprs: Vec<&Expr> = all_filters;
    exprs.extend(q.naf_blocks.iter().flat_map(|b| &b.filters));
    exprs.extend(q.having.iter());
    exprs.extend(q.order_by.iter().map(|k| &k.expr));
    for e in exprs {
        for (name, arity) in e.calls() {
            let p = pos.calls.get(name).copied().unwrap_or(origin);
            match BUILTINS.iter().find(|(n, _)| *n == name) {
                None => errs.push(QueryError::validation(format!("unknown function {name}"), p)),
                Some((_, want)) if *want != arity => errs.push(QueryError::validation(
                    format!("{name} takes {want} arguments, got {arity}"),
                    p,
                )),
                _ => {}
            }
        }
    }

    for b in &q.stream_blocks {
        if let StreamSource::Var(v) = &b.source {
            let constrained = q.static_patterns.iter().any(|p| p.vars().contains(&v.as_str()));
            if !constrained {
                errs.push(QueryError::validation(
                    format!("stream variable ?{v} is not constrained by any static pattern"),
                    pos.var(v),
                ));
            }
        }
    }

    errs.sort_by_key(|e| (e.pos.line, e.pos.col));
    errs.dedup();
    errs
}
