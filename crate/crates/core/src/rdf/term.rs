use std::fmt;

use crate::lexer::escape_string;

/// An absolute IRI (prefixes already expanded).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(String);

impl Iri {
    pub fn new(iri: impl Into<String>) -> Self {
        Iri(iri.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl From<&str> for Iri {
    fn from(s: &str) -> Self {
        Iri(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datatype {
    String,
    Integer,
    Decimal,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    lexical: String,
    datatype: Datatype,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, datatype: Datatype) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype,
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Datatype {
        self.datatype
    }

    /// Numeric value for comparisons. Strings coerce when their lexical form
    /// is a plain decimal number (`'0.8'` compares like `0.8`).
    pub fn as_f64(&self) -> Option<f64> {
        match self.datatype {
            Datatype::Integer | Datatype::Decimal => self.lexical.parse().ok(),
            Datatype::String if is_decimal_lexical(&self.lexical) => self.lexical.parse().ok(),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match (self.datatype, self.lexical.as_str()) {
            (Datatype::Boolean, "true") => Some(true),
            (Datatype::Boolean, "false") => Some(false),
            _ => None,
        }
    }
}

/// `[+-]? (digits ('.' digits*)? | '.' digits)`
pub fn is_decimal_lexical(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => digits(int) && digits(f) && !(int.is_empty() && f.is_empty()),
    }
}

/// Subject, predicate, object. Patterns reuse the same shape with
/// [`Term::Variable`] in any position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.subject.is_ground() && self.predicate.is_ground() && self.object.is_ground()
    }

    /// Quoted-triple nesting depth of the terms in this triple.
    pub fn depth(&self) -> usize {
        self.subject
            .depth()
            .max(self.predicate.depth())
            .max(self.object.depth())
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
    BlankNode(String),
    Quoted(Box<Triple>),
    /// Only legal inside patterns.
    Variable(String),
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Self {
        Term::Iri(Iri::new(iri))
    }

    pub fn string(s: impl Into<String>) -> Self {
        Term::Literal(Literal::new(s, Datatype::String))
    }

    pub fn integer(i: i64) -> Self {
        Term::Literal(Literal::new(i.to_string(), Datatype::Integer))
    }

    /// Decimal literal; the lexical form always carries a '.'.
    pub fn decimal(x: f64) -> Self {
        let mut lex = format!("{x}");
        if !lex.contains('.') {
            lex.push_str(".0");
        }
        Term::Literal(Literal::new(lex, Datatype::Decimal))
    }

    pub fn boolean(b: bool) -> Self {
        Term::Literal(Literal::new(b.to_string(), Datatype::Boolean))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn quoted(t: Triple) -> Self {
        Term::Quoted(Box::new(t))
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_literal().and_then(Literal::as_f64)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) => false,
            Term::Quoted(t) => t.is_ground(),
            _ => true,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Quoted(t) => 1 + t.depth(),
            _ => 0,
        }
    }

    /// Variables in first-occurrence order (duplicates included).
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Variable(v) => out.push(v),
            Term::Quoted(t) => {
                for term in t.terms() {
                    term.collect_vars(out);
                }
            }
            _ => {}
        }
    }

    /// The canonical serialization, used for deterministic ordering.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

/// Canonical form: full IRIs, double-quoted strings, bare numbers/booleans.
/// The output is itself valid Turtle-star for this crate's reader.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(i) => write!(f, "{i}"),
            Term::Literal(l) => match l.datatype {
                Datatype::String => f.write_str(&escape_string(&l.lexical)),
                _ => f.write_str(&l.lexical),
            },
            Term::BlankNode(b) => write!(f, "_:{b}"),
            Term::Quoted(t) => write!(f, "<< {t} >>"),
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}
