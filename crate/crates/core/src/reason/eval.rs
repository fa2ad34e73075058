//! Filter and builtin evaluation.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::geometry::{appearance_distance, iou, parse_descriptor, BoundingBox};
use crate::query::{Aggregate, ArithOp, CmpOp, Expr};
use crate::rdf::vocab::ssr;
use crate::rdf::{Binding, Datatype, Term, Triple};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable ?{0}")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("{0}() failed: {1}")]
    Builtin(String, String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("aggregate {0} used outside a group")]
    AggregateOutsideGroup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Term(Term),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Term(t) => t.as_f64(),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Term(t) => t.as_literal().and_then(|l| l.as_bool()),
            Value::Num(_) => None,
        }
    }

    /// Back to an RDF term. Whole numbers become integers.
    pub fn into_term(self) -> Term {
        match self {
            Value::Term(t) => t,
            Value::Bool(b) => Term::boolean(b),
            Value::Num(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Term::integer(x as i64),
            Value::Num(x) => Term::decimal(x),
        }
    }
}

/// Box geometry and appearance descriptors visible to the builtins, keyed by
/// the subject of `ssr:bbox` / `ssr:descriptor` triples.
#[derive(Debug, Clone, Default)]
pub struct Features {
    boxes: HashMap<Term, String>,
    descriptors: HashMap<Term, String>,
}

impl Features {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later triples override earlier ones for the same subject.
    pub fn add<'a, I: IntoIterator<Item = &'a Triple>>(&mut self, triples: I) {
        let bbox = ssr("bbox");
        let desc = ssr("descriptor");
        for t in triples {
            let Some(lit) = t.object.as_literal() else { continue };
            if t.predicate == bbox {
                self.boxes.insert(t.subject.clone(), lit.lexical().to_string());
            } else if t.predicate == desc {
                self.descriptors.insert(t.subject.clone(), lit.lexical().to_string());
            }
        }
    }

    fn bbox(&self, t: &Term) -> Result<BoundingBox, String> {
        let lex = match t {
            Term::Literal(l) if l.datatype() == Datatype::String => l.lexical(),
            _ => self.boxes.get(t).ok_or_else(|| format!("no ssr:bbox for {t}"))?,
        };
        BoundingBox::parse(lex).map_err(|e| e.to_string())
    }

    fn descriptor(&self, t: &Term) -> Result<Vec<f64>, String> {
        let lex = match t {
            Term::Literal(l) if l.datatype() == Datatype::String => l.lexical(),
            _ => self
                .descriptors
                .get(t)
                .ok_or_else(|| format!("no ssr:descriptor for {t}"))?,
        };
        parse_descriptor(lex).map_err(|e| e.to_string())
    }
}

/// Stable key for an aggregate expression, e.g. `COUNT(DISTINCT ?x)`.
pub fn agg_key(a: &Aggregate) -> String {
    let d = if a.distinct { "DISTINCT " } else { "" };
    match &a.arg {
        Some(v) => format!("{}({d}?{v})", a.func.name()),
        None => format!("{}({d}*)", a.func.name()),
    }
}

pub struct Env<'a> {
    pub binding: &'a Binding,
    pub features: &'a Features,
    /// Group-level aggregate values, keyed by [`agg_key`].
    pub aggregates: Option<&'a BTreeMap<String, Value>>,
}

impl<'a> Env<'a> {
    pub fn new(binding: &'a Binding, features: &'a Features) -> Self {
        Env {
            binding,
            features,
            aggregates: None,
        }
    }
}

pub fn eval(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    match e {
        Expr::Var(v) => env
            .binding
            .get(v)
            .cloned()
            .map(Value::Term)
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Const(t) => Ok(Value::Term(t.clone())),
        Expr::Or(a, b) => {
            if boolean(a, env)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(boolean(b, env)?))
        }
        Expr::And(a, b) => {
            if !boolean(a, env)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(boolean(b, env)?))
        }
        Expr::Not(a) => Ok(Value::Bool(!boolean(a, env)?)),
        Expr::Cmp(op, a, b) => compare(*op, &eval(a, env)?, &eval(b, env)?).map(Value::Bool),
        Expr::Arith(op, a, b) => {
            let x = number(a, env)?;
            let y = number(b, env)?;
            let r = match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => {
                    if y == 0.0 {
                        return Err(EvalError::Type("division by zero".into()));
                    }
                    x / y
                }
            };
            Ok(Value::Num(r))
        }
        Expr::Neg(a) => Ok(Value::Num(-number(a, env)?)),
        Expr::Call(name, args) => call(name, args, env),
        Expr::Aggregate(a) => {
            let key = agg_key(a);
            env.aggregates
                .and_then(|m| m.get(&key))
                .cloned()
                .ok_or(EvalError::AggregateOutsideGroup(key))
        }
    }
}

/// Effective boolean value; anything but a boolean is a type error.
pub fn boolean(e: &Expr, env: &Env) -> Result<bool, EvalError> {
    let v = eval(e, env)?;
    v.as_bool()
        .ok_or_else(|| EvalError::Type(format!("expected boolean, got {v:?}")))
}

fn number(e: &Expr, env: &Env) -> Result<f64, EvalError> {
    let v = eval(e, env)?;
    v.as_num()
        .ok_or_else(|| EvalError::Type(format!("expected number, got {v:?}")))
}

/// Numeric when both sides are numeric; otherwise only `=`/`!=` apply, as
/// term identity.
pub fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        return Ok(match op {
            CmpOp::Lt => x < y,
            CmpOp::Le => x <= y,
            CmpOp::Gt => x > y,
            CmpOp::Ge => x >= y,
            CmpOp::Eq => x == y,
            CmpOp::Ne => x != y,
        });
    }
    let same = match (a.as_bool(), b.as_bool()) {
        (Some(x), Some(y)) => x == y,
        _ => a.clone().into_term() == b.clone().into_term(),
    };
    match op {
        CmpOp::Eq => Ok(same),
        CmpOp::Ne => Ok(!same),
        _ => Err(EvalError::Type(format!(
            "cannot order {a:?} {} {b:?}",
            op.symbol()
        ))),
    }
}

fn call(name: &str, args: &[Expr], env: &Env) -> Result<Value, EvalError> {
    let terms = args
        .iter()
        .map(|a| eval(a, env).map(Value::into_term))
        .collect::<Result<Vec<_>, _>>()?;
    let fail = |m: String| EvalError::Builtin(name.to_string(), m);
    match (name, terms.as_slice()) {
        ("iou", [a, b]) => {
            let a = env.features.bbox(a).map_err(fail)?;
            let b = env.features.bbox(b).map_err(fail)?;
            Ok(Value::Num(iou(&a, &b)))
        }
        ("appDist", [a, b]) => {
            let a = env.features.descriptor(a).map_err(fail)?;
            let b = env.features.descriptor(b).map_err(fail)?;
            appearance_distance(&a, &b)
                .map(Value::Num)
                .map_err(|e| fail(e.to_string()))
        }
        _ => Err(EvalError::UnknownFunction(format!("{name}/{}", args.len()))),
    }
}
