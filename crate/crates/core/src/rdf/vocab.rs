//! Namespaces and the prefix table shared by every reader and writer.

use std::collections::BTreeMap;

use super::term::{Iri, Term};

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const SOSA: &str = "http://www.w3.org/ns/sosa/";
pub const SSN: &str = "http://www.w3.org/ns/ssn/";
pub const PROV: &str = "http://www.w3.org/ns/prov#";
pub const SH: &str = "http://www.w3.org/ns/shacl#";
pub const SSR: &str = "http://example.org/ssr#";
/// Namespace bound to the empty prefix `:`.
pub const BASE: &str = "http://example.org/thoth#";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

pub fn rdf_type() -> Term {
    Term::iri(RDF_TYPE)
}

pub fn sosa(local: &str) -> Term {
    Term::iri(format!("{SOSA}{local}"))
}

pub fn ssr(local: &str) -> Term {
    Term::iri(format!("{SSR}{local}"))
}

pub fn base(local: &str) -> Term {
    Term::iri(format!("{BASE}{local}"))
}

/// Prefix → namespace table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixMap {
    map: BTreeMap<String, String>,
}

impl Default for PrefixMap {
    /// The well-known prefixes used throughout the examples and rule files.
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for (p, ns) in [
            ("", BASE),
            ("rdf", RDF),
            ("rdfs", RDFS),
            ("xsd", XSD),
            ("sosa", SOSA),
            ("ssn", SSN),
            ("prov", PROV),
            ("sh", SH),
            ("ssr", SSR),
        ] {
            map.insert(p.to_string(), ns.to_string());
        }
        PrefixMap { map }
    }
}

impl PrefixMap {
    pub fn empty() -> Self {
        PrefixMap {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prefix: impl Into<String>, ns: impl Into<String>) {
        self.map.insert(prefix.into(), ns.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.map.get(prefix).map(String::as_str)
    }

    pub fn expand(&self, prefix: &str, local: &str) -> Option<Iri> {
        self.get(prefix).map(|ns| Iri::new(format!("{ns}{local}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(p, n)| (p.as_str(), n.as_str()))
    }

    /// Shortest prefixed form of `iri`, if some namespace covers it with a
    /// local part the lexer can read back.
    pub fn compact(&self, iri: &str) -> Option<String> {
        self.map
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()))
            .map(|(p, ns)| (p, &iri[ns.len()..]))
            .filter(|(_, local)| is_valid_local(local))
            .min_by_key(|(p, local)| (p.len() + local.len(), p.len()))
            .map(|(p, local)| format!("{p}:{local}"))
    }
}

fn is_valid_local(local: &str) -> bool {
    let name_char = |c: char| c.is_alphanumeric() || c == '_' || c == '-';
    if local.is_empty() {
        return true;
    }
    !local.starts_with('.')
        && !local.ends_with('.')
        && !local.starts_with('-')
        && local.chars().all(|c| name_char(c) || c == '.')
}
