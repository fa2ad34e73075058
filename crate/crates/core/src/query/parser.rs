//! Recursive-descent parser for the query dialect.

use super::ast::*;
use super::error::QueryError;
use super::validate::{validate, Positions};
use crate::lexer::{tokenize, Position, Token, TokenCursor, TokenKind};
use crate::rdf::vocab::{PrefixMap, RDF_TYPE};
use crate::rdf::{Datatype, Iri, Literal, Term, Triple};

pub const MAX_QUOTE_DEPTH: usize = 8;

/// Parses and validates a query with the default prefix table.
pub fn parse_query(text: &str) -> Result<Query, Vec<QueryError>> {
    parse_query_with(text, &PrefixMap::default())
}

pub fn parse_query_with(text: &str, prefixes: &PrefixMap) -> Result<Query, Vec<QueryError>> {
    let (q, positions) = parse_unvalidated(text, prefixes).map_err(|e| vec![e])?;
    let errors = validate(&q, &positions);
    if errors.is_empty() {
        Ok(q)
    } else {
        Err(errors)
    }
}

/// Syntax only; returns the AST and the source positions the validator
/// reports against.
pub fn parse_unvalidated(text: &str, prefixes: &PrefixMap) -> Result<(Query, Positions), QueryError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(toks, prefixes.clone());
    let q = p.query()?;
    Ok((q, p.positions))
}

pub(crate) struct Parser {
    pub(crate) cur: TokenCursor,
    pub(crate) prefixes: PrefixMap,
    pub(crate) positions: Positions,
}

type PResult<T> = Result<T, QueryError>;

const PATTERN_END: [&str; 3] = ["FILTER", "STREAM", "NAF"];

impl Parser {
    pub(crate) fn new(toks: Vec<Token>, prefixes: PrefixMap) -> Self {
        Parser {
            cur: TokenCursor::new(toks),
            prefixes,
            positions: Positions::default(),
        }
    }

    fn pos(&self) -> Position {
        self.cur.peek().pos
    }

    pub(crate) fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = self.cur.peek_kind().describe();
        let message = if expected.len() == 1 {
            format!("expected {}, found {found}", expected[0])
        } else {
            format!("unexpected {found}")
        };
        Err(QueryError::grammar(
            expected.iter().map(|s| s.to_string()).collect(),
            message,
            self.pos(),
        ))
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<()> {
        if self.cur.eat(&kind) {
            Ok(())
        } else {
            self.fail(&[&kind.describe()])
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.cur.eat_keyword(kw) {
            Ok(())
        } else {
            self.fail(&[kw])
        }
    }

    fn var(&mut self) -> PResult<String> {
        let pos = self.pos();
        match self.cur.peek_kind().clone() {
            TokenKind::Var(v) => {
                self.cur.next();
                self.positions.vars.entry(v.clone()).or_insert(pos);
                Ok(v)
            }
            _ => self.fail(&["variable"]),
        }
    }

    pub(crate) fn prologue(&mut self) -> PResult<()> {
        loop {
            let at_style = matches!(self.cur.peek_kind(), TokenKind::AtKeyword(k) if k == "prefix");
            if !at_style && !self.cur.at_keyword("PREFIX") {
                return Ok(());
            }
            self.cur.next();
            let prefix = match self.cur.peek_kind().clone() {
                TokenKind::PrefixedName { prefix, local } if local.is_empty() => prefix,
                _ => return self.fail(&["prefix declaration 'name:'"]),
            };
            self.cur.next();
            let ns = match self.cur.peek_kind().clone() {
                TokenKind::IriRef(ns) => ns,
                _ => return self.fail(&["<namespace IRI>"]),
            };
            self.cur.next();
            if at_style {
                self.expect(TokenKind::Dot)?;
            }
            self.prefixes.insert(prefix, ns);
        }
    }

    fn query(&mut self) -> PResult<Query> {
        self.prologue()?;
        let mut q = if self.cur.eat_keyword("SELECT") {
            let projection = self.projection()?;
            Query::empty(QueryForm::Select { projection })
        } else if self.cur.eat_keyword("CONSTRUCT") {
            self.expect(TokenKind::LBrace)?;
            let template = self.patterns(false)?;
            self.expect(TokenKind::RBrace)?;
            Query::empty(QueryForm::Construct { template })
        } else {
            return self.fail(&["SELECT", "CONSTRUCT"]);
        };
        self.cur.eat_keyword("WHERE");
        self.where_body(&mut q)?;
        self.modifiers(&mut q)?;
        if !self.cur.is_eof() {
            return self.fail(&["end of query"]);
        }
        Ok(q)
    }

    fn projection(&mut self) -> PResult<Vec<Projection>> {
        let mut out = Vec::new();
        loop {
            match self.cur.peek_kind() {
                TokenKind::Var(_) => out.push(Projection::Var(self.var()?)),
                TokenKind::LParen => {
                    self.cur.next();
                    let pos = self.pos();
                    let agg = match self.aggregate()? {
                        Some(a) => a,
                        None => return self.fail(&["aggregate"]),
                    };
                    self.positions.aggregates.push(pos);
                    self.expect_keyword("AS")?;
                    let alias = self.var()?;
                    self.expect(TokenKind::RParen)?;
                    out.push(Projection::Aggregate { agg, alias });
                }
                _ if out.is_empty() => return self.fail(&["variable", "(aggregate AS ?var)"]),
                _ => return Ok(out),
            }
        }
    }

    /// `COUNT([DISTINCT] (*|?v))` and friends; `None` if the next token is
    /// not an aggregate name.
    fn aggregate(&mut self) -> PResult<Option<Aggregate>> {
        let func = match self.cur.peek_kind() {
            TokenKind::Name(n) if *self.cur.peek_nth(1) == TokenKind::LParen => {
                match AggFunc::from_name(n) {
                    Some(f) => f,
                    None => return Ok(None),
                }
            }
            _ => return Ok(None),
        };
        self.cur.next();
        self.cur.next();
        let distinct = self.cur.eat_keyword("DISTINCT");
        let arg = if func == AggFunc::Count && self.cur.eat(&TokenKind::Star) {
            None
        } else {
            Some(self.var()?)
        };
        self.expect(TokenKind::RParen)?;
        Ok(Some(Aggregate {
            func,
            distinct,
            arg,
        }))
    }

    fn where_body(&mut self, q: &mut Query) -> PResult<()> {
        self.expect(TokenKind::LBrace)?;
        loop {
            if self.cur.eat(&TokenKind::RBrace) {
                return Ok(());
            }
            if self.cur.at_keyword("STREAM") {
                let b = self.stream_block()?;
                q.stream_blocks.push(b);
            } else if self.cur.eat_keyword("NAF") {
                if !self.cur.at_keyword("STREAM") {
                    return self.fail(&["STREAM"]);
                }
                let b = self.stream_block()?;
                q.naf_blocks.push(b);
            } else if self.cur.eat_keyword("FILTER") {
                q.filters.push(self.filter()?);
            } else {
                self.statement(&mut q.static_patterns, true)?;
            }
        }
    }

    fn stream_block(&mut self) -> PResult<StreamBlock> {
        self.expect_keyword("STREAM")?;
        let pos = self.pos();
        let source = match self.cur.peek_kind() {
            TokenKind::Var(_) => StreamSource::Var(self.var()?),
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => match self.term(0)? {
                Term::Iri(i) => StreamSource::Iri(i),
                _ => return Err(QueryError::grammar(vec!["stream IRI".into()], "blank node as stream source", pos)),
            },
            _ => return self.fail(&["stream IRI", "variable"]),
        };
        let window = self.window()?;
        self.expect(TokenKind::LBrace)?;
        let mut patterns = Vec::new();
        let mut filters = Vec::new();
        loop {
            if self.cur.eat(&TokenKind::RBrace) {
                break;
            }
            if self.cur.eat_keyword("FILTER") {
                filters.push(self.filter()?);
            } else if self.cur.at_keyword("STREAM") || self.cur.at_keyword("NAF") {
                return self.fail(&["triple pattern", "FILTER", "}"]);
            } else {
                self.statement(&mut patterns, true)?;
            }
        }
        Ok(StreamBlock {
            source,
            window,
            patterns,
            filters,
        })
    }

    fn window(&mut self) -> PResult<Option<Window>> {
        let wpos = self.pos();
        if self.cur.at_keyword("window") && *self.cur.peek_nth(1) == TokenKind::LBracket {
            self.cur.next();
            self.cur.next();
            let width_ms = self.duration()?;
            self.expect(TokenKind::RBracket)?;
            return Ok(Some(Window { width_ms, on: None }));
        }
        if !self.cur.eat(&TokenKind::LBracket) {
            return Ok(None);
        }
        if self.cur.eat_keyword("NOW") {
            self.expect(TokenKind::RBracket)?;
            return Ok(None);
        }
        self.expect_keyword("RANGE")?;
        let width_ms = self.duration()?;
        let on = if self.cur.eat_keyword("ON") {
            match self.term(0)? {
                Term::Iri(i) => Some(i),
                _ => return self.fail(&["timestamp attribute IRI"]),
            }
        } else {
            None
        };
        self.expect(TokenKind::RBracket)?;
        let supported = Iri::new(format!("{}resultTime", crate::rdf::vocab::SOSA));
        let on = on.unwrap_or_else(|| supported.clone());
        if on != supported {
            return Err(QueryError::validation(
                format!("window attribute {on} is not supported (only sosa:resultTime)"),
                wpos,
            ));
        }
        Ok(Some(Window {
            width_ms,
            on: Some(on),
        }))
    }

    /// `<n> <unit>` in milliseconds. Units: ms, s/sec/second(s), m/min/minute(s), h/hour(s).
    fn duration(&mut self) -> PResult<u64> {
        let pos = self.pos();
        let n: u64 = match self.cur.peek_kind() {
            TokenKind::Integer(n) => n.parse().map_err(|_| {
                QueryError::grammar(vec!["duration".into()], format!("duration out of range: {n}"), pos)
            })?,
            _ => return self.fail(&["duration (e.g. 5 sec)"]),
        };
        self.cur.next();
        let scale = match self.cur.peek_kind() {
            TokenKind::Name(u) => match u.to_ascii_lowercase().as_str() {
                "ms" => 1,
                "s" | "sec" | "second" | "seconds" => 1_000,
                "m" | "min" | "minute" | "minutes" => 60_000,
                "h" | "hour" | "hours" => 3_600_000,
                _ => return self.fail(&["time unit (ms, sec, min, h)"]),
            },
            _ => return self.fail(&["time unit (ms, sec, min, h)"]),
        };
        self.cur.next();
        let ms = n.checked_mul(scale).ok_or_else(|| {
            QueryError::grammar(vec!["duration".into()], "duration out of range", pos)
        })?;
        if ms == 0 {
            return Err(QueryError::grammar(vec!["positive duration".into()], "window width must be positive", pos));
        }
        Ok(ms)
    }

    fn modifiers(&mut self, q: &mut Query) -> PResult<()> {
        if self.cur.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            q.group_by.push(self.var()?);
            while matches!(self.cur.peek_kind(), TokenKind::Var(_)) {
                q.group_by.push(self.var()?);
            }
        }
        if self.cur.eat_keyword("HAVING") {
            self.positions.having = Some(self.pos());
            q.having = Some(self.filter()?);
        }
        if self.cur.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let key = if self.cur.at_keyword("ASC") || self.cur.at_keyword("DESC") {
                    let descending = self.cur.at_keyword("DESC");
                    self.cur.next();
                    self.expect(TokenKind::LParen)?;
                    let expr = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    OrderKey { expr, descending }
                } else if matches!(self.cur.peek_kind(), TokenKind::Var(_) | TokenKind::LParen) {
                    OrderKey {
                        expr: self.primary()?,
                        descending: false,
                    }
                } else if q.order_by.is_empty() {
                    return self.fail(&["ASC(..)", "DESC(..)", "variable"]);
                } else {
                    break;
                };
                q.order_by.push(key);
            }
        }
        Ok(())
    }

    /// Statements up to the closing brace of a template or block.
    fn patterns(&mut self, allow_paths: bool) -> PResult<Vec<Pattern>> {
        let mut out = Vec::new();
        while !self.cur.at(&TokenKind::RBrace) && !self.cur.is_eof() {
            self.statement(&mut out, allow_paths)?;
        }
        Ok(out)
    }

    fn at_statement_end(&self) -> bool {
        matches!(self.cur.peek_kind(), TokenKind::Dot | TokenKind::RBrace)
            || PATTERN_END.iter().any(|k| self.cur.at_keyword(k))
    }

    /// One subject with its predicate-object list. A quoted subject may carry
    /// `@ ?T`, which makes it an occurrence pattern on its own.
    fn statement(&mut self, out: &mut Vec<Pattern>, allow_paths: bool) -> PResult<()> {
        let spos = self.pos();
        let subject = self.term(0)?;
        if matches!(subject, Term::Literal(_)) {
            return Err(QueryError::grammar(
                vec!["subject".into()],
                "literal in subject position",
                spos,
            ));
        }
        let mut need_predicates = true;
        if self.cur.eat(&TokenKind::At) {
            let time = self.var()?;
            match &subject {
                Term::Quoted(t) => out.push(Pattern::Occurrence {
                    triple: (**t).clone(),
                    time,
                }),
                _ => {
                    return Err(QueryError::grammar(
                        vec!["quoted triple".into()],
                        "'@ ?var' needs a quoted triple subject",
                        spos,
                    ))
                }
            }
            need_predicates = self.cur.eat(&TokenKind::Semicolon) && !self.at_statement_end();
        }
        if need_predicates {
            loop {
                let predicate = self.verb(allow_paths)?;
                loop {
                    let object = self.term(0)?;
                    let time = if self.cur.eat(&TokenKind::At) {
                        Some(self.var()?)
                    } else {
                        None
                    };
                    out.push(Pattern::Triple(TriplePattern {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                        time,
                    }));
                    if !self.cur.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                if self.cur.eat(&TokenKind::Semicolon) {
                    while self.cur.eat(&TokenKind::Semicolon) {}
                    if self.at_statement_end() {
                        break;
                    }
                    continue;
                }
                break;
            }
        }
        if self.cur.eat(&TokenKind::Dot) || self.at_statement_end() {
            Ok(())
        } else {
            self.fail(&[".", ";", ",", "}"])
        }
    }

    fn verb(&mut self, allow_paths: bool) -> PResult<Predicate> {
        let pos = self.pos();
        let first = match self.cur.peek_kind() {
            TokenKind::Var(_) => return Ok(Predicate::Term(Term::var(self.var()?))),
            TokenKind::Name(n) if n == "a" => {
                self.cur.next();
                Iri::new(RDF_TYPE)
            }
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => match self.term(0)? {
                Term::Iri(i) => i,
                _ => return Err(QueryError::grammar(vec!["predicate IRI".into()], "blank node as predicate", pos)),
            },
            _ => return self.fail(&["predicate", "a", "variable"]),
        };
        if !self.cur.at(&TokenKind::Slash) {
            return Ok(Predicate::Term(Term::Iri(first)));
        }
        if !allow_paths {
            return self.fail(&["object"]);
        }
        let mut steps = vec![first];
        while self.cur.eat(&TokenKind::Slash) {
            let spos = self.pos();
            match self.cur.peek_kind() {
                TokenKind::Name(n) if n == "a" => {
                    self.cur.next();
                    steps.push(Iri::new(RDF_TYPE));
                }
                TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => match self.term(0)? {
                    Term::Iri(i) => steps.push(i),
                    _ => return Err(QueryError::grammar(vec!["path step IRI".into()], "blank node in path", spos)),
                },
                _ => return self.fail(&["path step IRI", "a"]),
            }
        }
        Ok(Predicate::Sequence(steps))
    }

    pub(crate) fn iri_ref(&self, content: &str, pos: Position) -> PResult<Iri> {
        // `<ssr:FoV>`, `<:ssr>`: a bracketed prefixed name with a known prefix.
        if let Some((prefix, local)) = content.split_once(':') {
            if !local.starts_with("//") {
                if let Some(iri) = self.prefixes.expand(prefix, local) {
                    return Ok(iri);
                }
            }
        }
        if content.is_empty() {
            return Err(QueryError::grammar(vec!["IRI".into()], "empty IRI", pos));
        }
        Ok(Iri::new(content))
    }

    pub(crate) fn term(&mut self, depth: usize) -> PResult<Term> {
        let tok = self.cur.peek().clone();
        let t = match tok.kind {
            TokenKind::Var(_) => return Ok(Term::var(self.var()?)),
            TokenKind::IriRef(ref s) => Term::Iri(self.iri_ref(s, tok.pos)?),
            TokenKind::PrefixedName { ref prefix, ref local } => {
                if prefix == "_" {
                    Term::BlankNode(local.clone())
                } else {
                    match self.prefixes.expand(prefix, local) {
                        Some(i) => Term::Iri(i),
                        None => {
                            return Err(QueryError::grammar(
                                vec!["declared prefix".into()],
                                format!("unknown prefix '{prefix}:'"),
                                tok.pos,
                            ))
                        }
                    }
                }
            }
            TokenKind::Str(ref s) => Term::string(s.clone()),
            TokenKind::Integer(ref n) => Term::Literal(Literal::new(n.clone(), Datatype::Integer)),
            TokenKind::Decimal(ref n) => Term::Literal(Literal::new(n.clone(), Datatype::Decimal)),
            TokenKind::Minus => {
                self.cur.next();
                return match self.cur.peek_kind().clone() {
                    TokenKind::Integer(n) => {
                        self.cur.next();
                        Ok(Term::Literal(Literal::new(format!("-{n}"), Datatype::Integer)))
                    }
                    TokenKind::Decimal(n) => {
                        self.cur.next();
                        Ok(Term::Literal(Literal::new(format!("-{n}"), Datatype::Decimal)))
                    }
                    _ => self.fail(&["number"]),
                };
            }
            TokenKind::Name(ref n) if n == "true" || n == "false" => Term::boolean(n == "true"),
            TokenKind::QuotedOpen => {
                if depth + 1 > MAX_QUOTE_DEPTH {
                    return Err(QueryError::grammar(
                        vec![],
                        format!("quoted triple nesting exceeds {MAX_QUOTE_DEPTH}"),
                        tok.pos,
                    ));
                }
                self.cur.next();
                let s = self.term(depth + 1)?;
                let p = match self.verb(false)? {
                    Predicate::Term(p) => p,
                    Predicate::Sequence(_) => unreachable!("paths disabled"),
                };
                let o = self.term(depth + 1)?;
                self.expect(TokenKind::QuotedClose)?;
                return Ok(Term::quoted(Triple::new(s, p, o)));
            }
            _ => return self.fail(&["term"]),
        };
        self.cur.next();
        Ok(t)
    }

    /// `FILTER` / `HAVING` argument: a bracketed expression or a call.
    fn filter(&mut self) -> PResult<Expr> {
        match self.cur.peek_kind() {
            TokenKind::LParen => {
                self.cur.next();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Name(_) if *self.cur.peek_nth(1) == TokenKind::LParen => self.primary(),
            _ => self.fail(&["(", "function call"]),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.cur.eat(&TokenKind::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.rel_expr()?;
        while self.cur.eat(&TokenKind::AndAnd) {
            let rhs = self.rel_expr()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.cur.peek_kind() {
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::Gt => CmpOp::Gt,
            TokenKind::Ge => CmpOp::Ge,
            TokenKind::Eq => CmpOp::Eq,
            TokenKind::Ne => CmpOp::Ne,
            _ => return Ok(lhs),
        };
        self.cur.next();
        let rhs = self.add_expr()?;
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.cur.peek_kind() {
                TokenKind::Plus => ArithOp::Add,
                TokenKind::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.mul_expr()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur.peek_kind() {
                TokenKind::Star => ArithOp::Mul,
                TokenKind::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.unary()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.cur.peek_kind() {
            TokenKind::Not => {
                self.cur.next();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            TokenKind::Minus => {
                // A sign directly on a number literal folds into the constant.
                if matches!(self.cur.peek_nth(1), TokenKind::Integer(_) | TokenKind::Decimal(_)) {
                    return Ok(Expr::Const(self.term(0)?));
                }
                self.cur.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            TokenKind::Plus => {
                self.cur.next();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.cur.peek_kind().clone() {
            TokenKind::LParen => {
                self.cur.next();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Var(_) => Ok(Expr::Var(self.var()?)),
            TokenKind::Name(n) if *self.cur.peek_nth(1) == TokenKind::LParen => {
                if let Some(a) = self.aggregate()? {
                    self.positions.aggregates.push(pos);
                    return Ok(Expr::Aggregate(a));
                }
                self.cur.next();
                self.cur.next();
                let mut args = Vec::new();
                if !self.cur.eat(&TokenKind::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.cur.eat(&TokenKind::RParen) {
                            break;
                        }
                        if !self.cur.eat(&TokenKind::Comma) {
                            return self.fail(&[",", ")"]);
                        }
                    }
                }
                self.positions.calls.entry(n.clone()).or_insert(pos);
                Ok(Expr::Call(n, args))
            }
            TokenKind::QuotedOpen => self.fail(&["expression"]),
            _ => Ok(Expr::Const(self.term(0)?)),
        }
    }
}
