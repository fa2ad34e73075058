//! Rule documents: SHACL-shaped node shapes wrapping a CONSTRUCT query.
//!
//! ```text
//! ssr:rule_w_1 a sh:NodeShape ;
//!   sh:rule [ a sh:CQELSRule ; sh:prefixes ssr: ; sh:construct """ CONSTRUCT ... """ ] ;
//!   ssr:weight 1.0 .
//! ```
//!
//! A shape without `ssr:weight` is a hard rule, unless it is typed
//! `ssr:SoftRule`, in which case the missing weight is an error.

use super::ast::{QueryForm, Rule, RuleKind};
use super::error::QueryError;
use super::parser::{parse_query_with, Parser};
use crate::lexer::{tokenize, Position, TokenKind};
use crate::rdf::vocab::{PrefixMap, RDFS, RDF_TYPE, SH, SSR};
use crate::rdf::{Iri, Term};

pub fn parse_rule_document(text: &str) -> Result<Vec<Rule>, Vec<QueryError>> {
    parse_rule_document_with(text, &PrefixMap::default())
}

pub fn parse_rule_document_with(text: &str, prefixes: &PrefixMap) -> Result<Vec<Rule>, Vec<QueryError>> {
    let toks = tokenize(text).map_err(|e| vec![QueryError::from(e)])?;
    let mut p = Parser::new(toks, prefixes.clone());
    let mut shapes = Vec::new();
    let mut errors = Vec::new();
    p.prologue().map_err(|e| vec![e])?;
    while !p.cur.is_eof() {
        let shape = read_shape(&mut p).map_err(|e| vec![e])?;
        shapes.push((shape, p.prefixes.clone()));
        p.prologue().map_err(|e| vec![e])?;
    }
    let mut rules = Vec::new();
    for (shape, prefixes) in shapes {
        match interpret(shape, &prefixes, text) {
            Ok(r) => {
                if rules.iter().any(|o: &Rule| o.id == r.id) {
                    errors.push(QueryError::validation(format!("duplicate rule id {}", r.id), Position { line: 1, col: 1 }));
                }
                rules.push(r)
            }
            Err(mut e) => errors.append(&mut e),
        }
    }
    if errors.is_empty() {
        Ok(rules)
    } else {
        Err(errors)
    }
}

enum Value {
    Term(Term, Position),
    Node(Vec<Prop>, Position),
}

impl Value {
    fn pos(&self) -> Position {
        match self {
            Value::Term(_, p) | Value::Node(_, p) => *p,
        }
    }
}

struct Prop {
    predicate: Iri,
    value: Value,
}

struct Shape {
    id: Iri,
    pos: Position,
    props: Vec<Prop>,
}

fn read_shape(p: &mut Parser) -> Result<Shape, QueryError> {
    let pos = p.cur.peek().pos;
    let id = match p.cur.peek_kind() {
        TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => match p.term(0)? {
            Term::Iri(i) => i,
            _ => return Err(QueryError::grammar(vec!["rule IRI".into()], "rule id must be an IRI", pos)),
        },
        _ => return p.fail(&["rule IRI"]),
    };
    let props = read_props(p, TokenKind::Dot)?;
    if !p.cur.eat(&TokenKind::Dot) {
        return p.fail(&["."]);
    }
    Ok(Shape { id, pos, props })
}

/// Predicate-object list up to (not including) `end`.
fn read_props(p: &mut Parser, end: TokenKind) -> Result<Vec<Prop>, QueryError> {
    let mut out = Vec::new();
    loop {
        if p.cur.at(&end) && end == TokenKind::RBracket {
            return Ok(out);
        }
        let ppos = p.cur.peek().pos;
        let predicate = match p.cur.peek_kind() {
            TokenKind::Name(n) if n == "a" => {
                p.cur.next();
                Iri::new(RDF_TYPE)
            }
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => match p.term(0)? {
                Term::Iri(i) => i,
                _ => return Err(QueryError::grammar(vec!["predicate".into()], "blank node as predicate", ppos)),
            },
            _ => return p.fail(&["predicate", "a"]),
        };
        loop {
            let vpos = p.cur.peek().pos;
            let value = if p.cur.eat(&TokenKind::LBracket) {
                let inner = read_props(p, TokenKind::RBracket)?;
                if !p.cur.eat(&TokenKind::RBracket) {
                    return p.fail(&["]"]);
                }
                Value::Node(inner, vpos)
            } else {
                Value::Term(p.term(0)?, vpos)
            };
            out.push(Prop {
                predicate: predicate.clone(),
                value,
            });
            if !p.cur.eat(&TokenKind::Comma) {
                break;
            }
        }
        if !p.cur.eat(&TokenKind::Semicolon) {
            return Ok(out);
        }
        while p.cur.eat(&TokenKind::Semicolon) {}
        if p.cur.at(&end) {
            return Ok(out);
        }
    }
}

fn iri(ns: &str, local: &str) -> Iri {
    Iri::new(format!("{ns}{local}"))
}

fn interpret(shape: Shape, prefixes: &PrefixMap, src: &str) -> Result<Rule, Vec<QueryError>> {
    let err = |m: String, pos: Position| vec![QueryError::validation(m, pos)];
    let rdf_type = Iri::new(RDF_TYPE);
    let types: Vec<&Term> = shape
        .props
        .iter()
        .filter(|p| p.predicate == rdf_type)
        .filter_map(|p| match &p.value {
            Value::Term(t, _) => Some(t),
            Value::Node(..) => None,
        })
        .collect();
    let has_type = |i: Iri| types.contains(&&Term::Iri(i));
    if !has_type(iri(SH, "NodeShape")) {
        return Err(err(format!("{} is not declared a sh:NodeShape", shape.id), shape.pos));
    }
    let declared_soft = has_type(iri(SSR, "SoftRule"));
    let declared_hard = has_type(iri(SSR, "HardRule"));

    let mut rule_nodes = Vec::new();
    let mut weights = Vec::new();
    for prop in &shape.props {
        let pos = prop.value.pos();
        if prop.predicate == rdf_type {
            if matches!(prop.value, Value::Node(..)) {
                return Err(err("rdf:type value must be an IRI".into(), pos));
            }
        } else if prop.predicate == iri(SH, "rule") {
            match &prop.value {
                Value::Node(inner, _) => rule_nodes.push((inner, pos)),
                Value::Term(..) => return Err(err("sh:rule must be a [ ... ] node".into(), pos)),
            }
        } else if prop.predicate == iri(SSR, "weight") {
            match &prop.value {
                Value::Term(t, _) => match t.as_literal().filter(|l| l.datatype() != crate::rdf::Datatype::String).and_then(|l| l.as_f64()) {
                    Some(w) => weights.push((w, pos)),
                    None => return Err(err("ssr:weight must be a number".into(), pos)),
                },
                Value::Node(..) => return Err(err("ssr:weight must be a number".into(), pos)),
            }
        } else if prop.predicate != iri(RDFS, "label") && prop.predicate != iri(RDFS, "comment") {
            return Err(err(format!("unexpected property {} on rule shape", prop.predicate), pos));
        }
    }
    let (inner, rule_pos) = match rule_nodes.as_slice() {
        [one] => *one,
        [] => return Err(err(format!("{} has no sh:rule", shape.id), shape.pos)),
        [_, (_, pos), ..] => return Err(err("exactly one sh:rule per shape is supported".into(), *pos)),
    };
    let kind = match weights.as_slice() {
        [] if declared_soft => {
            return Err(err(format!("soft rule {} has no ssr:weight", shape.id), shape.pos))
        }
        [] => RuleKind::Hard,
        [(w, pos)] => {
            if declared_hard {
                return Err(err("hard rules cannot carry a weight".into(), *pos));
            }
            if !(w.is_finite() && *w > 0.0) {
                return Err(err(format!("weight must be positive and finite, got {w}"), *pos));
            }
            RuleKind::Soft { weight: *w }
        }
        [_, (_, pos), ..] => return Err(err("more than one ssr:weight".into(), *pos)),
    };

    let mut construct = None;
    let mut is_cqels = false;
    for prop in inner {
        let pos = prop.value.pos();
        match (&prop.value, prop.predicate.as_str()) {
            (Value::Term(Term::Iri(t), _), RDF_TYPE) if *t == iri(SH, "CQELSRule") => is_cqels = true,
            (Value::Term(Term::Literal(l), _), p) if p == iri(SH, "construct").as_str() => {
                if construct.is_some() {
                    return Err(err("more than one sh:construct".into(), pos));
                }
                if l.datatype() != crate::rdf::Datatype::String {
                    return Err(err("sh:construct must be a string".into(), pos));
                }
                construct = Some((l.lexical().to_string(), pos));
            }
            (Value::Term(..), p) if p == iri(SH, "prefixes").as_str() => {}
            _ => return Err(err(format!("unexpected property {} in sh:rule", prop.predicate), pos)),
        }
    }
    if !is_cqels {
        return Err(err("sh:rule node must be typed sh:CQELSRule".into(), rule_pos));
    }
    let Some((text, spos)) = construct else {
        return Err(err("sh:rule node has no sh:construct".into(), rule_pos));
    };
    let origin = content_origin(src, spos);
    let query = parse_query_with(&text, prefixes)
        .map_err(|es| es.into_iter().map(|e| e.relocate(origin)).collect::<Vec<_>>())?;
    if !matches!(query.form, QueryForm::Construct { .. }) {
        return Err(err("sh:construct must hold a CONSTRUCT query".into(), spos));
    }
    Ok(Rule {
        id: shape.id,
        kind,
        query,
    })
}

/// Position of the first content character of the string literal at `pos`.
fn content_origin(src: &str, pos: Position) -> Position {
    let line = src.lines().nth(pos.line - 1).unwrap_or("");
    let rest: String = line.chars().skip(pos.col - 1).take(3).collect();
    let skip = if rest == "\"\"\"" || rest == "'''" { 3 } else { 1 };
    Position {
        line: pos.line,
        col: pos.col + skip,
    }
}
