//! Centralized evaluation of SELECT queries, with grouping and aggregates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use log::debug;

use super::eval::{agg_key, boolean, eval, Env, EvalError, Features, Value};
use super::ground::{solutions, EvalContext};
use crate::query::{AggFunc, Aggregate, Projection, Query, QueryForm};
use crate::rdf::{Binding, Datatype, Term};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectResult {
    pub vars: Vec<String>,
    /// One entry per projected variable; `None` when unbound.
    pub rows: Vec<Vec<Option<Term>>>,
}

impl SelectResult {
    /// Tab-separated, header first.
    pub fn to_tsv(&self) -> String {
        let mut out = self
            .vars
            .iter()
            .map(|v| format!("?{v}"))
            .collect::<Vec<_>>()
            .join("\t");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| c.as_ref().map(Term::to_string).unwrap_or_default())
                .collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

pub fn projection_names(q: &Query) -> Vec<String> {
    match &q.form {
        QueryForm::Select { projection } => projection
            .iter()
            .map(|p| match p {
                Projection::Var(v) => v.clone(),
                Projection::Aggregate { alias, .. } => alias.clone(),
            })
            .collect(),
        QueryForm::Construct { .. } => Vec::new(),
    }
}

/// Value of one aggregate over a group of solutions.
pub fn aggregate(a: &Aggregate, rows: &[Binding]) -> Result<Value, EvalError> {
    let mut vals: Vec<Term> = match &a.arg {
        None => return Ok(Value::Num(rows.len() as f64)),
        Some(v) => rows.iter().filter_map(|r| r.get(v).cloned()).collect(),
    };
    if a.distinct {
        let set: BTreeSet<Term> = vals.into_iter().collect();
        vals = set.into_iter().collect();
    }
    let nums = || -> Result<Vec<f64>, EvalError> {
        vals.iter()
            .map(|t| {
                t.as_f64()
                    .ok_or_else(|| EvalError::Type(format!("{} over non-number {t}", a.func.name())))
            })
            .collect()
    };
    match a.func {
        AggFunc::Count => Ok(Value::Num(vals.len() as f64)),
        AggFunc::Sum => {
            let all_int = vals
                .iter()
                .all(|t| t.as_literal().map(|l| l.datatype()) == Some(Datatype::Integer));
            let s: f64 = nums()?.iter().sum();
            Ok(if all_int { Value::Num(s) } else { Value::Term(Term::decimal(s)) })
        }
        AggFunc::Avg => {
            let n = nums()?;
            if n.is_empty() {
                return Ok(Value::Num(0.0));
            }
            Ok(Value::Term(Term::decimal(n.iter().sum::<f64>() / n.len() as f64)))
        }
        AggFunc::Min | AggFunc::Max => {
            let pick = vals.into_iter().reduce(|x, y| {
                let o = order_terms(&x, &y);
                let keep_x = match a.func {
                    AggFunc::Min => o != Ordering::Greater,
                    _ => o != Ordering::Less,
                };
                if keep_x {
                    x
                } else {
                    y
                }
            });
            pick.map(Value::Term)
                .ok_or_else(|| EvalError::Type(format!("{} of an empty group", a.func.name())))
        }
    }
}

/// Numbers numerically, everything else by canonical text; numbers first.
pub fn order_terms(a: &Term, b: &Term) -> Ordering {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.to_string().cmp(&b.to_string()),
    }
}

fn order_opt(a: &Option<Term>, b: &Option<Term>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => order_terms(x, y),
    }
}

fn group_key(b: &Binding, vars: &[String]) -> Vec<Option<Term>> {
    vars.iter().map(|v| b.get(v).cloned()).collect()
}

/// A group after aggregation: its environment (group keys plus aliases) and
/// aggregate values.
pub struct GroupRow {
    pub key: Vec<Option<Term>>,
    pub env: Binding,
    pub aggregates: BTreeMap<String, Value>,
}

/// Evaluates HAVING, ORDER BY and the projection over finished groups.
/// Shared by centralized evaluation and the federated merge.
pub fn finish_groups(q: &Query, mut groups: Vec<GroupRow>) -> SelectResult {
    let features = Features::new();
    let projection = match &q.form {
        QueryForm::Select { projection } => projection.clone(),
        QueryForm::Construct { .. } => Vec::new(),
    };
    for g in &mut groups {
        for p in &projection {
            if let Projection::Aggregate { agg, alias } = p {
                if let Some(v) = g.aggregates.get(&agg_key(agg)) {
                    g.env.insert(alias.clone(), v.clone().into_term());
                }
            }
        }
    }
    if let Some(h) = &q.having {
        groups.retain(|g| {
            let env = Env {
                binding: &g.env,
                features: &features,
                aggregates: Some(&g.aggregates),
            };
            match boolean(h, &env) {
                Ok(b) => b,
                Err(e) => {
                    debug!("group dropped by HAVING: {e}");
                    false
                }
            }
        });
    }
    let keyed: Vec<(Vec<Option<Term>>, GroupRow)> = groups
        .into_iter()
        .map(|g| {
            let env = Env {
                binding: &g.env,
                features: &features,
                aggregates: Some(&g.aggregates),
            };
            let ks = q
                .order_by
                .iter()
                .map(|k| eval(&k.expr, &env).ok().map(Value::into_term))
                .collect();
            (ks, g)
        })
        .collect();
    let mut keyed = keyed;
    keyed.sort_by(|(ka, ga), (kb, gb)| {
        for (i, k) in q.order_by.iter().enumerate() {
            let o = order_opt(&ka[i], &kb[i]);
            let o = if k.descending { o.reverse() } else { o };
            if o != Ordering::Equal {
                return o;
            }
        }
        // Ties fall back to the group key.
        for (x, y) in ga.key.iter().zip(&gb.key) {
            let o = order_opt(x, y).then_with(|| {
                x.as_ref()
                    .map(Term::to_string)
                    .cmp(&y.as_ref().map(Term::to_string))
            });
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
    let vars = projection_names(q);
    let rows = keyed
        .into_iter()
        .map(|(_, g)| vars.iter().map(|v| g.env.get(v).cloned()).collect())
        .collect();
    SelectResult { vars, rows }
}

fn is_grouped(q: &Query) -> bool {
    !q.group_by.is_empty() || !q.aggregates().is_empty()
}

/// Groups solutions and computes every aggregate the query mentions.
pub fn group_solutions(q: &Query, rows: &[Binding]) -> Vec<GroupRow> {
    let mut groups: BTreeMap<Vec<String>, (Vec<Option<Term>>, Vec<Binding>)> = BTreeMap::new();
    for r in rows {
        let key = group_key(r, &q.group_by);
        let skey = key
            .iter()
            .map(|t| t.as_ref().map(Term::to_string).unwrap_or_default())
            .collect();
        groups.entry(skey).or_insert_with(|| (key, Vec::new())).1.push(r.clone());
    }
    if groups.is_empty() && q.group_by.is_empty() {
        groups.insert(Vec::new(), (Vec::new(), Vec::new()));
    }
    let aggs = q.aggregates();
    groups
        .into_values()
        .map(|(key, members)| {
            let mut env = Binding::new();
            for (v, t) in q.group_by.iter().zip(&key) {
                if let Some(t) = t {
                    env.insert(v.clone(), t.clone());
                }
            }
            let mut values = BTreeMap::new();
            for a in &aggs {
                match aggregate(a, &members) {
                    Ok(v) => {
                        values.insert(agg_key(a), v);
                    }
                    Err(e) => debug!("aggregate {} unbound: {e}", agg_key(a)),
                }
            }
            GroupRow {
                key,
                env,
                aggregates: values,
            }
        })
        .collect()
}

pub fn evaluate_select(q: &Query, ctx: &EvalContext) -> SelectResult {
    let rows = solutions(q, ctx);
    if is_grouped(q) {
        return finish_groups(q, group_solutions(q, &rows));
    }
    // Ungrouped: each solution is its own group keyed by the projection.
    let vars = projection_names(q);
    let groups = rows
        .into_iter()
        .map(|b| GroupRow {
            key: vars.iter().map(|v| b.get(v).cloned()).collect(),
            env: b,
            aggregates: BTreeMap::new(),
        })
        .collect();
    finish_groups(q, groups)
}
