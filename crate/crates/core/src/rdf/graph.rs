use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::term::{Term, Triple};

/// Variable name → bound term.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding(BTreeMap<String, Term>);

impl Binding {
    pub fn new() -> Self {
        Binding(BTreeMap::new())
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, term: Term) -> Option<Term> {
        self.0.insert(var.into(), term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Substitutes bound variables; unbound ones are left in place.
    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Variable(v) => self.0.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Quoted(q) => Term::quoted(self.apply_triple(q)),
            _ => t.clone(),
        }
    }

    pub fn apply_triple(&self, t: &Triple) -> Triple {
        Triple::new(
            self.apply(&t.subject),
            self.apply(&t.predicate),
            self.apply(&t.object),
        )
    }

    /// Union of two bindings, or `None` if they disagree on a shared variable.
    pub fn merge(&self, other: &Binding) -> Option<Binding> {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            match out.0.get(k) {
                Some(old) if old != v => return None,
                Some(_) => {}
                None => {
                    out.0.insert(k.clone(), v.clone());
                }
            }
        }
        Some(out)
    }

    /// Key used for deterministic ordering: canonical forms of bound terms in
    /// variable-name order.
    pub fn sort_key(&self) -> Vec<String> {
        self.0.values().map(Term::canonical).collect()
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}→{v}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(String, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

/// Extends `b` so that `pattern` equals `data`, recursing into quoted triples.
pub fn unify(pattern: &Term, data: &Term, b: &mut Binding) -> bool {
    match (pattern, data) {
        (Term::Variable(v), _) => match b.get(v) {
            Some(bound) => bound == data,
            None => {
                b.insert(v.clone(), data.clone());
                true
            }
        },
        (Term::Quoted(p), Term::Quoted(d)) => unify_triple(p, d, b),
        _ => pattern == data,
    }
}

pub fn unify_triple(pattern: &Triple, data: &Triple, b: &mut Binding) -> bool {
    unify(&pattern.subject, &data.subject, b)
        && unify(&pattern.predicate, &data.predicate, b)
        && unify(&pattern.object, &data.object, b)
}

/// A static set of triples. Inserting a duplicate is a no-op.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    triples: BTreeSet<Triple>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the triple was already present.
    ///
    /// # Panics
    /// If the triple contains a variable.
    pub fn insert(&mut self, t: Triple) -> bool {
        assert!(t.is_ground(), "variables cannot be stored in a graph: {t}");
        self.triples.insert(t)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        self.triples.remove(t)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> std::collections::btree_set::Iter<'_, Triple> {
        self.triples.iter()
    }

    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, it: I) {
        for t in it {
            self.insert(t);
        }
    }

    /// Bindings extending `seed` under which `pattern` matches some triple.
    pub fn match_with(&self, pattern: &Triple, seed: &Binding) -> Vec<Binding> {
        let mut out = Vec::new();
        for t in &self.triples {
            let mut b = seed.clone();
            if unify_triple(pattern, t, &mut b) {
                out.push(b);
            }
        }
        out
    }
}

impl FromIterator<Triple> for KnowledgeGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = KnowledgeGraph::new();
        g.extend(iter);
        g
    }
}

/// Every binding under which `pattern` is in `graph`, without duplicates,
/// ordered by the canonical serialization of the bound terms.
pub fn graph_match(graph: &KnowledgeGraph, pattern: &Triple) -> Vec<Binding> {
    let mut out = graph.match_with(pattern, &Binding::new());
    sort_dedup(&mut out);
    out
}

pub fn sort_dedup(bindings: &mut Vec<Binding>) {
    bindings.sort_by_cached_key(|b| (b.sort_key(), b.clone()));
    bindings.dedup();
}
