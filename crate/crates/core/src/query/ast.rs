//! Typed syntax tree for queries and rules. All prefixed names are expanded.

use crate::rdf::{Iri, Term, Triple};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub form: QueryForm,
    pub stream_blocks: Vec<StreamBlock>,
    /// Patterns over the default (static) graph.
    pub static_patterns: Vec<Pattern>,
    pub filters: Vec<Expr>,
    pub naf_blocks: Vec<StreamBlock>,
    pub group_by: Vec<String>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderKey>,
}

impl Query {
    pub fn empty(form: QueryForm) -> Self {
        Query {
            form,
            stream_blocks: Vec::new(),
            static_patterns: Vec::new(),
            filters: Vec::new(),
            naf_blocks: Vec::new(),
            group_by: Vec::new(),
            having: None,
            order_by: Vec::new(),
        }
    }

    pub fn template(&self) -> Option<&[Pattern]> {
        match &self.form {
            QueryForm::Construct { template } => Some(template),
            QueryForm::Select { .. } => None,
        }
    }

    pub fn aggregates(&self) -> Vec<&Aggregate> {
        let mut out = Vec::new();
        if let QueryForm::Select { projection } = &self.form {
            for p in projection {
                if let Projection::Aggregate { agg, .. } = p {
                    out.push(agg);
                }
            }
        }
        if let Some(h) = &self.having {
            h.collect_aggregates(&mut out);
        }
        for k in &self.order_by {
            k.expr.collect_aggregates(&mut out);
        }
        out
    }

    /// Variables bound by the positive part of the body (stream blocks and
    /// static patterns), in first-occurrence order.
    pub fn bound_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |v: &str| {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        };
        for b in &self.stream_blocks {
            if let StreamSource::Var(v) = &b.source {
                push(v);
            }
            for p in &b.patterns {
                for v in p.vars() {
                    push(v);
                }
            }
        }
        for p in &self.static_patterns {
            for v in p.vars() {
                push(v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryForm {
    Select { projection: Vec<Projection> },
    Construct { template: Vec<Pattern> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Var(String),
    Aggregate { agg: Aggregate, alias: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Avg => "AVG",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            "AVG" => AggFunc::Avg,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub func: AggFunc,
    pub distinct: bool,
    /// `None` is `*`.
    pub arg: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderKey {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    Iri(Iri),
    Var(String),
}

/// Time window over a stream, `(now - width, now]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub width_ms: u64,
    /// Timestamp attribute from the `[RANGE .. ON attr]` spelling; `None` for
    /// `window[..]`.
    pub on: Option<Iri>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamBlock {
    pub source: StreamSource,
    /// `None` means the current tick only.
    pub window: Option<Window>,
    pub patterns: Vec<Pattern>,
    pub filters: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Term(Term),
    /// `p1/p2/...`, at least two steps.
    Sequence(Vec<Iri>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Predicate,
    pub object: Term,
    /// `s p o @ ?T`: binds the matching element's timestamp.
    pub time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    Triple(TriplePattern),
    /// `<< s p o >> @ ?T`. In a body it matches an element whose triple is
    /// `s p o` or whose subject is the quoted `<< s p o >>`; in a head it
    /// emits `s p o` at `T`.
    Occurrence { triple: Triple, time: String },
}

impl Pattern {
    pub fn triple(s: Term, p: Term, o: Term) -> Self {
        Pattern::Triple(TriplePattern {
            subject: s,
            predicate: Predicate::Term(p),
            object: o,
            time: None,
        })
    }

    /// Variables in first-occurrence order, with duplicates.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            Pattern::Triple(t) => {
                t.subject.collect_vars(&mut out);
                if let Predicate::Term(p) = &t.predicate {
                    p.collect_vars(&mut out);
                }
                t.object.collect_vars(&mut out);
                if let Some(v) = &t.time {
                    out.push(v);
                }
            }
            Pattern::Occurrence { triple, time } => {
                for term in triple.terms() {
                    term.collect_vars(&mut out);
                }
                out.push(time);
            }
        }
        out
    }

    pub fn time_var(&self) -> Option<&str> {
        match self {
            Pattern::Triple(t) => t.time.as_deref(),
            Pattern::Occurrence { time, .. } => Some(time),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Const(Term),
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(String, Vec<Expr>),
    Aggregate(Aggregate),
}

impl Expr {
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Var(v) => out.push(v.as_str()),
            Expr::Aggregate(Aggregate { arg: Some(v), .. }) => out.push(v.as_str()),
            _ => {}
        });
        out
    }

    pub fn collect_aggregates<'a>(&'a self, out: &mut Vec<&'a Aggregate>) {
        self.walk(&mut |e| {
            if let Expr::Aggregate(a) = e {
                out.push(a);
            }
        });
    }

    pub fn calls(&self) -> Vec<(&str, usize)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Call(n, args) = e {
                out.push((n.as_str(), args.len()));
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Or(a, b) | Expr::And(a, b) | Expr::Cmp(_, a, b) | Expr::Arith(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Not(a) | Expr::Neg(a) => a.walk(f),
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            Expr::Var(_) | Expr::Const(_) | Expr::Aggregate(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    Soft { weight: f64 },
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: Iri,
    pub kind: RuleKind,
    /// A CONSTRUCT query: template is the head, the rest is the body.
    pub query: Query,
}

impl Rule {
    pub fn head(&self) -> &[Pattern] {
        self.query.template().unwrap_or(&[])
    }

    pub fn weight(&self) -> Option<f64> {
        match self.kind {
            RuleKind::Soft { weight } => Some(weight),
            RuleKind::Hard => None,
        }
    }

    pub fn is_soft(&self) -> bool {
        matches!(self.kind, RuleKind::Soft { .. })
    }
}
