//! Reader and writer for the Turtle-star subset used by semantic streams.
//!
//! Supported: `@prefix`/`PREFIX` declarations, `;` predicate lists, `,`
//! object lists, the `a` keyword, quoted triples `<< s p o >>`, string
//! literals in any quote style, bare integers/decimals, `true`/`false`, blank
//! node labels `_:x`. Timed documents additionally accept `@time <n> .` and
//! `@stream <iri> .` directives that set the timestamp and target stream of
//! the statements that follow.

use std::fmt::Write as _;

use thiserror::Error;

use super::stream::TimedTriple;
use super::term::{Datatype, Iri, Literal, Term, Triple};
use super::vocab::{PrefixMap, RDF_TYPE};
use crate::lexer::{tokenize, Position, TokenCursor, TokenKind};

/// Default cap on quoted-triple nesting.
pub const DEFAULT_MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurtleError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { message: String, pos: Position },
    #[error("{pos}: quoted triple nesting exceeds {max}")]
    DepthExceeded { max: usize, pos: Position },
    #[error("{pos}: unknown prefix '{prefix}:'")]
    UnknownPrefix { prefix: String, pos: Position },
}

impl TurtleError {
    pub fn position(&self) -> Position {
        match self {
            TurtleError::Syntax { pos, .. }
            | TurtleError::DepthExceeded { pos, .. }
            | TurtleError::UnknownPrefix { pos, .. } => *pos,
        }
    }
}

/// Parses a Turtle-star document with the default prefix table.
pub fn parse_turtle_star(text: &str) -> Result<Vec<Triple>, TurtleError> {
    TurtleReader::default().parse(text)
}

/// A timed document element: target stream plus timestamped triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamStatement {
    pub stream: Iri,
    pub element: TimedTriple,
}

#[derive(Debug, Clone)]
pub struct TurtleReader {
    pub prefixes: PrefixMap,
    pub max_depth: usize,
}

impl Default for TurtleReader {
    fn default() -> Self {
        TurtleReader {
            prefixes: PrefixMap::default(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl TurtleReader {
    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn parse(&self, text: &str) -> Result<Vec<Triple>, TurtleError> {
        let mut st = self.state(text)?;
        let mut out = Vec::new();
        while !st.cur.is_eof() {
            if st.directive(false)?.is_some() {
                continue;
            }
            st.statement(&mut out)?;
        }
        Ok(out)
    }

    /// Parses a timed document. Statements before any `@time` directive get
    /// timestamp 0; the stream defaults to `default_stream`.
    pub fn parse_timed(
        &self,
        text: &str,
        default_stream: &Iri,
    ) -> Result<Vec<StreamStatement>, TurtleError> {
        let mut st = self.state(text)?;
        let mut out = Vec::new();
        let mut now = 0u64;
        let mut stream = default_stream.clone();
        let mut buf = Vec::new();
        while !st.cur.is_eof() {
            match st.directive(true)? {
                Some(Directive::Time(t)) => now = t,
                Some(Directive::Stream(s)) => stream = s,
                Some(Directive::Prefix) => {}
                None => {
                    buf.clear();
                    st.statement(&mut buf)?;
                    out.extend(buf.drain(..).map(|triple| StreamStatement {
                        stream: stream.clone(),
                        element: TimedTriple::new(triple, now),
                    }));
                }
            }
        }
        Ok(out)
    }

    fn state(&self, text: &str) -> Result<ReaderState, TurtleError> {
        let toks = tokenize(text).map_err(|e| TurtleError::Syntax {
            message: e.message,
            pos: e.pos,
        })?;
        Ok(ReaderState {
            cur: TokenCursor::new(toks),
            prefixes: self.prefixes.clone(),
            max_depth: self.max_depth,
        })
    }
}

enum Directive {
    Prefix,
    Time(u64),
    Stream(Iri),
}

struct ReaderState {
    cur: TokenCursor,
    prefixes: PrefixMap,
    max_depth: usize,
}

impl ReaderState {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, TurtleError> {
        Err(TurtleError::Syntax {
            message: message.into(),
            pos: self.cur.peek().pos,
        })
    }

    fn expected<T>(&self, what: &str) -> Result<T, TurtleError> {
        let found = self.cur.peek_kind().describe();
        self.err(format!("expected {what}, found {found}"))
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), TurtleError> {
        if self.cur.eat(&kind) {
            Ok(())
        } else {
            self.expected(&kind.describe())
        }
    }

    fn directive(&mut self, timed: bool) -> Result<Option<Directive>, TurtleError> {
        let sparql_style = self.cur.at_keyword("PREFIX");
        match self.cur.peek_kind().clone() {
            TokenKind::AtKeyword(k) if k == "prefix" => {}
            TokenKind::AtKeyword(k) if timed && k == "time" => {
                self.cur.next();
                let t = match self.cur.next().kind {
                    TokenKind::Integer(n) => n.parse().map_err(|_| TurtleError::Syntax {
                        message: format!("timestamp out of range: {n}"),
                        pos: self.cur.peek().pos,
                    })?,
                    _ => return self.err("expected integer timestamp after @time"),
                };
                self.expect(TokenKind::Dot)?;
                return Ok(Some(Directive::Time(t)));
            }
            TokenKind::AtKeyword(k) if timed && k == "stream" => {
                self.cur.next();
                let iri = match self.term(0)? {
                    Term::Iri(i) => i,
                    _ => return self.err("expected stream IRI after @stream"),
                };
                self.expect(TokenKind::Dot)?;
                return Ok(Some(Directive::Stream(iri)));
            }
            TokenKind::AtKeyword(k) => return self.err(format!("unknown directive @{k}")),
            _ if sparql_style => {}
            _ => return Ok(None),
        }
        self.cur.next();
        let prefix = match self.cur.next().kind {
            TokenKind::PrefixedName { prefix, local } if local.is_empty() => prefix,
            _ => return self.err("expected 'prefix:' in prefix declaration"),
        };
        let ns = match self.cur.next().kind {
            TokenKind::IriRef(iri) => iri,
            _ => return self.err("expected <namespace> in prefix declaration"),
        };
        if !sparql_style {
            self.expect(TokenKind::Dot)?;
        }
        self.prefixes.insert(prefix, ns);
        Ok(Some(Directive::Prefix))
    }

    fn statement(&mut self, out: &mut Vec<Triple>) -> Result<(), TurtleError> {
        let subject = self.term(0)?;
        if matches!(subject, Term::Literal(_)) {
            return self.err("literal in subject position");
        }
        loop {
            let predicate = self.verb()?;
            loop {
                let object = self.term(0)?;
                out.push(Triple::new(subject.clone(), predicate.clone(), object));
                if !self.cur.eat(&TokenKind::Comma) {
                    break;
                }
            }
            if self.cur.eat(&TokenKind::Semicolon) {
                // trailing ';' before '.'
                while self.cur.eat(&TokenKind::Semicolon) {}
                if self.cur.at(&TokenKind::Dot) {
                    break;
                }
                continue;
            }
            break;
        }
        self.expect(TokenKind::Dot)
    }

    fn verb(&mut self) -> Result<Term, TurtleError> {
        if self.cur.at_keyword("a") && matches!(self.cur.peek_kind(), TokenKind::Name(n) if n == "a")
        {
            self.cur.next();
            return Ok(Term::iri(RDF_TYPE));
        }
        match self.cur.peek_kind() {
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => {
                let t = self.term(0)?;
                if matches!(t, Term::BlankNode(_)) {
                    return self.err("blank node in predicate position");
                }
                Ok(t)
            }
            _ => self.expected("predicate IRI or 'a'"),
        }
    }

    fn term(&mut self, depth: usize) -> Result<Term, TurtleError> {
        let tok = self.cur.peek().clone();
        match tok.kind {
            TokenKind::IriRef(iri) => {
                self.cur.next();
                Ok(Term::Iri(Iri::new(iri)))
            }
            TokenKind::PrefixedName { prefix, local } => {
                self.cur.next();
                if prefix == "_" {
                    return Ok(Term::BlankNode(local));
                }
                self.prefixes
                    .expand(&prefix, &local)
                    .map(Term::Iri)
                    .ok_or(TurtleError::UnknownPrefix {
                        prefix,
                        pos: tok.pos,
                    })
            }
            TokenKind::Str(s) => {
                self.cur.next();
                Ok(Term::string(s))
            }
            TokenKind::Integer(n) => {
                self.cur.next();
                Ok(Term::Literal(Literal::new(n, Datatype::Integer)))
            }
            TokenKind::Decimal(n) => {
                self.cur.next();
                Ok(Term::Literal(Literal::new(n, Datatype::Decimal)))
            }
            TokenKind::Minus | TokenKind::Plus => {
                let sign = if tok.kind == TokenKind::Minus { "-" } else { "" };
                self.cur.next();
                match self.cur.next().kind {
                    TokenKind::Integer(n) => Ok(Term::Literal(Literal::new(
                        format!("{sign}{n}"),
                        Datatype::Integer,
                    ))),
                    TokenKind::Decimal(n) => Ok(Term::Literal(Literal::new(
                        format!("{sign}{n}"),
                        Datatype::Decimal,
                    ))),
                    _ => self.err("expected number after sign"),
                }
            }
            TokenKind::Name(ref n) if n == "true" || n == "false" => {
                self.cur.next();
                Ok(Term::boolean(n == "true"))
            }
            TokenKind::QuotedOpen => {
                if depth + 1 > self.max_depth {
                    return Err(TurtleError::DepthExceeded {
                        max: self.max_depth,
                        pos: tok.pos,
                    });
                }
                self.cur.next();
                let s = self.term(depth + 1)?;
                if matches!(s, Term::Literal(_)) {
                    return self.err("literal in quoted subject position");
                }
                let p = self.verb()?;
                let o = self.term(depth + 1)?;
                self.expect(TokenKind::QuotedClose)?;
                Ok(Term::quoted(Triple::new(s, p, o)))
            }
            TokenKind::Var(_) => self.err("variables are not allowed in data"),
            _ => self.expected("term"),
        }
    }
}

/// Writes triples as Turtle-star, compacting IRIs with `prefixes` and
/// grouping consecutive triples that share a subject with `;`. Only the
/// prefixes actually used are declared.
pub fn write_turtle(triples: &[Triple], prefixes: &PrefixMap) -> String {
    let mut body = String::new();
    let mut used = std::collections::BTreeSet::new();
    write_statements(&mut body, triples, prefixes, &mut used);
    let mut out = declarations(prefixes, &used);
    out.push_str(&body);
    out
}

/// Writes timed elements grouped by stream and timestamp, with `@stream` and
/// `@time` directives. Element order is preserved.
pub fn write_timed(statements: &[StreamStatement], prefixes: &PrefixMap) -> String {
    let mut body = String::new();
    let mut used = std::collections::BTreeSet::new();
    let mut i = 0;
    let mut cur_stream: Option<&Iri> = None;
    let mut cur_time: Option<u64> = None;
    while i < statements.len() {
        let s = &statements[i];
        let mut j = i;
        while j < statements.len()
            && statements[j].stream == s.stream
            && statements[j].element.timestamp == s.element.timestamp
        {
            j += 1;
        }
        if cur_stream != Some(&s.stream) {
            let _ = writeln!(body, "@stream {} .", compact_iri(&s.stream, prefixes, &mut used));
            cur_stream = Some(&s.stream);
        }
        if cur_time != Some(s.element.timestamp) {
            let _ = writeln!(body, "@time {} .", s.element.timestamp);
            cur_time = Some(s.element.timestamp);
        }
        let triples: Vec<Triple> = statements[i..j]
            .iter()
            .map(|s| s.element.triple.clone())
            .collect();
        write_statements(&mut body, &triples, prefixes, &mut used);
        i = j;
    }
    let mut out = declarations(prefixes, &used);
    out.push_str(&body);
    out
}

fn declarations(prefixes: &PrefixMap, used: &std::collections::BTreeSet<String>) -> String {
    let mut out = String::new();
    for p in used {
        if let Some(ns) = prefixes.get(p) {
            let _ = writeln!(out, "@prefix {p}: <{ns}> .");
        }
    }
    out
}

fn write_statements(
    out: &mut String,
    triples: &[Triple],
    prefixes: &PrefixMap,
    used: &mut std::collections::BTreeSet<String>,
) {
    let mut i = 0;
    while i < triples.len() {
        let subj = &triples[i].subject;
        let _ = write!(out, "{}", term_str(subj, prefixes, used));
        let mut first = true;
        while i < triples.len() && &triples[i].subject == subj {
            let t = &triples[i];
            let sep = if first { " " } else { " ;\n    " };
            first = false;
            let _ = write!(
                out,
                "{sep}{} {}",
                predicate_str(&t.predicate, prefixes, used),
                term_str(&t.object, prefixes, used)
            );
            i += 1;
        }
        out.push_str(" .\n");
    }
}

fn compact_iri(
    iri: &Iri,
    prefixes: &PrefixMap,
    used: &mut std::collections::BTreeSet<String>,
) -> String {
    match prefixes.compact(iri.as_str()) {
        Some(c) => {
            let p = c.split_once(':').map(|(p, _)| p).unwrap_or_default();
            used.insert(p.to_string());
            c
        }
        None => iri.to_string(),
    }
}

fn predicate_str(
    t: &Term,
    prefixes: &PrefixMap,
    used: &mut std::collections::BTreeSet<String>,
) -> String {
    match t {
        Term::Iri(i) if i.as_str() == RDF_TYPE => "a".to_string(),
        _ => term_str(t, prefixes, used),
    }
}

/// Compact serialization of one term (prefixed names where possible).
pub fn term_str(
    t: &Term,
    prefixes: &PrefixMap,
    used: &mut std::collections::BTreeSet<String>,
) -> String {
    match t {
        Term::Iri(i) => compact_iri(i, prefixes, used),
        Term::Quoted(q) => format!(
            "<< {} {} {} >>",
            term_str(&q.subject, prefixes, used),
            predicate_str(&q.predicate, prefixes, used),
            term_str(&q.object, prefixes, used)
        ),
        other => other.to_string(),
    }
}
