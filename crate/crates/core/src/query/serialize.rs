//! Canonical text form of queries and rule documents. Reparsing the output
//! yields an equal AST.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::ast::*;
use crate::rdf::vocab::{PrefixMap, RDF_TYPE};
use crate::rdf::{Iri, Term};

pub trait Canonical {
    fn to_canonical(&self) -> String;
}

impl Canonical for Query {
    fn to_canonical(&self) -> String {
        serialize_query(self)
    }
}

impl Canonical for Rule {
    fn to_canonical(&self) -> String {
        serialize_rule(self)
    }
}

impl Canonical for [Rule] {
    fn to_canonical(&self) -> String {
        serialize_rules(self)
    }
}

pub fn serialize_ast<A: Canonical + ?Sized>(ast: &A) -> String {
    ast.to_canonical()
}

pub fn serialize_query(q: &Query) -> String {
    let mut p = Printer::new();
    let body = p.query(q);
    let mut out = String::new();
    for (prefix, ns) in p.declarations() {
        let _ = writeln!(out, "PREFIX {prefix}: <{ns}>");
    }
    out.push_str(&body);
    out
}

pub fn serialize_rule(r: &Rule) -> String {
    serialize_rules(std::slice::from_ref(r))
}

pub fn serialize_rules(rules: &[Rule]) -> String {
    let mut p = Printer::new();
    let mut body = String::new();
    for (i, r) in rules.iter().enumerate() {
        if i > 0 {
            body.push('\n');
        }
        p.rule(r, &mut body);
    }
    let mut out = String::new();
    for (prefix, ns) in p.declarations() {
        let _ = writeln!(out, "@prefix {prefix}: <{ns}> .");
    }
    if !out.is_empty() && !body.is_empty() {
        out.push('\n');
    }
    out.push_str(&body);
    out
}

/// Width in the largest unit that divides it evenly.
pub fn format_duration(ms: u64) -> String {
    for (scale, unit) in [(3_600_000, "h"), (60_000, "min"), (1_000, "sec")] {
        if ms % scale == 0 {
            return format!("{} {unit}", ms / scale);
        }
    }
    format!("{ms} ms")
}

struct Printer {
    prefixes: PrefixMap,
    used: BTreeSet<String>,
}

impl Printer {
    fn new() -> Self {
        Printer {
            prefixes: PrefixMap::default(),
            used: BTreeSet::new(),
        }
    }

    fn declarations(&self) -> Vec<(String, String)> {
        self.used
            .iter()
            .filter_map(|p| self.prefixes.get(p).map(|ns| (p.clone(), ns.to_string())))
            .collect()
    }

    fn iri(&mut self, iri: &Iri) -> String {
        match self.prefixes.compact(iri.as_str()) {
            Some(c) => {
                let prefix = c.split_once(':').map(|(p, _)| p).unwrap_or_default();
                self.used.insert(prefix.to_string());
                c
            }
            None => iri.to_string(),
        }
    }

    fn term(&mut self, t: &Term) -> String {
        match t {
            Term::Iri(i) => self.iri(i),
            Term::Quoted(q) => {
                let s = self.term(&q.subject);
                let p = self.verb_term(&q.predicate);
                let o = self.term(&q.object);
                format!("<< {s} {p} {o} >>")
            }
            other => other.to_string(),
        }
    }

    fn verb_term(&mut self, t: &Term) -> String {
        match t {
            Term::Iri(i) if i.as_str() == RDF_TYPE => "a".into(),
            _ => self.term(t),
        }
    }

    fn predicate(&mut self, p: &Predicate) -> String {
        match p {
            Predicate::Term(t) => self.verb_term(t),
            Predicate::Sequence(steps) => steps
                .iter()
                .map(|s| {
                    if s.as_str() == RDF_TYPE {
                        "a".to_string()
                    } else {
                        self.iri(s)
                    }
                })
                .collect::<Vec<_>>()
                .join("/"),
        }
    }

    fn pattern(&mut self, p: &Pattern) -> String {
        match p {
            Pattern::Triple(t) => {
                let s = self.term(&t.subject);
                let pr = self.predicate(&t.predicate);
                let o = self.term(&t.object);
                match &t.time {
                    Some(v) => format!("{s} {pr} {o} @ ?{v} ."),
                    None => format!("{s} {pr} {o} ."),
                }
            }
            Pattern::Occurrence { triple, time } => {
                let q = self.term(&Term::quoted(triple.clone()));
                format!("{q} @ ?{time} .")
            }
        }
    }

    fn query(&mut self, q: &Query) -> String {
        let mut out = String::new();
        match &q.form {
            QueryForm::Select { projection } => {
                out.push_str("SELECT");
                for p in projection {
                    match p {
                        Projection::Var(v) => {
                            let _ = write!(out, " ?{v}");
                        }
                        Projection::Aggregate { agg, alias } => {
                            let _ = write!(out, " ({} AS ?{alias})", aggregate(agg));
                        }
                    }
                }
                out.push('\n');
            }
            QueryForm::Construct { template } => {
                out.push_str("CONSTRUCT {\n");
                for p in template {
                    let _ = writeln!(out, "  {}", self.pattern(p));
                }
                out.push_str("}\n");
            }
        }
        out.push_str("WHERE {\n");
        for b in &q.stream_blocks {
            self.block(&mut out, b, false);
        }
        for b in &q.naf_blocks {
            self.block(&mut out, b, true);
        }
        for p in &q.static_patterns {
            let _ = writeln!(out, "  {}", self.pattern(p));
        }
        for f in &q.filters {
            let _ = writeln!(out, "  FILTER ({})", self.expr(f, 1));
        }
        out.push_str("}\n");
        if !q.group_by.is_empty() {
            out.push_str("GROUP BY");
            for v in &q.group_by {
                let _ = write!(out, " ?{v}");
            }
            out.push('\n');
        }
        if let Some(h) = &q.having {
            let _ = writeln!(out, "HAVING ({})", self.expr(h, 1));
        }
        if !q.order_by.is_empty() {
            out.push_str("ORDER BY");
            for k in &q.order_by {
                let dir = if k.descending { "DESC" } else { "ASC" };
                let _ = write!(out, " {dir}({})", self.expr(&k.expr, 1));
            }
            out.push('\n');
        }
        out
    }

    fn block(&mut self, out: &mut String, b: &StreamBlock, naf: bool) {
        out.push_str(if naf { "  NAF STREAM " } else { "  STREAM " });
        match &b.source {
            StreamSource::Iri(i) => out.push_str(&self.iri(i)),
            StreamSource::Var(v) => {
                let _ = write!(out, "?{v}");
            }
        }
        match &b.window {
            None => {}
            Some(Window { width_ms, on: None }) => {
                let _ = write!(out, " window[{}]", format_duration(*width_ms));
            }
            Some(Window {
                width_ms,
                on: Some(attr),
            }) => {
                let attr = self.iri(attr);
                let _ = write!(out, " [RANGE {} ON {attr}]", format_duration(*width_ms));
            }
        }
        out.push_str(" {\n");
        for p in &b.patterns {
            let _ = writeln!(out, "    {}", self.pattern(p));
        }
        for f in &b.filters {
            let _ = writeln!(out, "    FILTER ({})", self.expr(f, 1));
        }
        out.push_str("  }\n");
    }

    /// Prints `e`, parenthesized when it binds looser than `min`.
    fn expr(&mut self, e: &Expr, min: u8) -> String {
        let (prec, s) = match e {
            Expr::Var(v) => (7, format!("?{v}")),
            Expr::Const(t) => (7, self.term(t)),
            Expr::Aggregate(a) => (7, aggregate(a)),
            Expr::Call(n, args) => {
                let args: Vec<String> = args.iter().map(|a| self.expr(a, 1)).collect();
                (7, format!("{n}({})", args.join(", ")))
            }
            Expr::Or(a, b) => (1, format!("{} || {}", self.expr(a, 1), self.expr(b, 2))),
            Expr::And(a, b) => (2, format!("{} && {}", self.expr(a, 2), self.expr(b, 3))),
            Expr::Cmp(op, a, b) => (
                3,
                format!("{} {} {}", self.expr(a, 4), op.symbol(), self.expr(b, 4)),
            ),
            Expr::Arith(op, a, b) => {
                let p = match op {
                    ArithOp::Add | ArithOp::Sub => 4,
                    ArithOp::Mul | ArithOp::Div => 5,
                };
                (
                    p,
                    format!("{} {} {}", self.expr(a, p), op.symbol(), self.expr(b, p + 1)),
                )
            }
            Expr::Not(a) => (6, format!("!{}", self.expr(a, 6))),
            // Always bracketed so a sign never fuses with a number literal.
            Expr::Neg(a) => (6, format!("-({})", self.expr(a, 1))),
        };
        if prec < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn rule(&mut self, r: &Rule, out: &mut String) {
        let id = self.iri(&r.id);
        let node_shape = self.iri(&Iri::new(format!("{}NodeShape", crate::rdf::vocab::SH)));
        let rule_p = self.iri(&Iri::new(format!("{}rule", crate::rdf::vocab::SH)));
        let cqels = self.iri(&Iri::new(format!("{}CQELSRule", crate::rdf::vocab::SH)));
        let construct_p = self.iri(&Iri::new(format!("{}construct", crate::rdf::vocab::SH)));
        let body = self.query(&r.query);
        let embedded = body.replace('\\', "\\\\").replace('"', "\\\"");
        let _ = write!(
            out,
            "{id} a {node_shape} ;\n    {rule_p} [\n        a {cqels} ;\n        {construct_p} \"\"\"\n{embedded}\"\"\"\n    ]"
        );
        match r.kind {
            RuleKind::Soft { weight } => {
                let w = self.iri(&Iri::new(format!("{}weight", crate::rdf::vocab::SSR)));
                let _ = writeln!(out, " ;\n    {w} {} .", Term::decimal(weight));
            }
            RuleKind::Hard => out.push_str(" .\n"),
        }
    }
}

fn aggregate(a: &Aggregate) -> String {
    let distinct = if a.distinct { "DISTINCT " } else { "" };
    match &a.arg {
        Some(v) => format!("{}({distinct}?{v})", a.func.name()),
        None => format!("{}({distinct}*)", a.func.name()),
    }
}
