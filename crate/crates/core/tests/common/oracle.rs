//! Exhaustive reference for answer-set selection, plus a random instance
//! generator. Shared with the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use thoth_core::rdf::vocab::{base, sosa};
use thoth_core::rdf::{Binding, Iri, Term, Triple};
use thoth_core::reason::{CandidateFact, ConsistencyConstraint, Role};

pub struct OracleAnswer {
    /// Chosen (triple text, timestamp) keys, sorted.
    pub atoms: Vec<(String, u64)>,
    pub weight: f64,
}

/// Tries every subset of atoms. Among maximum-weight feasible subsets it
/// prefers the one containing the smallest atom on which they differ.
/// `None` if the hard facts alone are infeasible.
pub fn brute_force(cands: &[CandidateFact], cons: &[ConsistencyConstraint]) -> Option<OracleAnswer> {
    let mut atoms: BTreeMap<(String, u64), (Triple, f64, bool)> = BTreeMap::new();
    for c in cands {
        let e = atoms
            .entry((c.triple.to_string(), c.timestamp))
            .or_insert((c.triple.clone(), 0.0, false));
        if c.weight.is_infinite() {
            e.2 = true;
        } else {
            e.1 += c.weight;
        }
    }
    let keys: Vec<(String, u64)> = atoms.keys().cloned().collect();
    let vals: Vec<&(Triple, f64, bool)> = atoms.values().collect();
    let n = keys.len();
    assert!(n <= 20, "oracle limited to 20 atoms");

    let feasible = |mask: u64| -> bool {
        for i in 0..n {
            if vals[i].2 && mask & (1 << i) == 0 {
                return false;
            }
        }
        for c in cons {
            match c {
                ConsistencyConstraint::FunctionalRole { predicate, position } => {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            if mask & (1 << i) == 0 || mask & (1 << j) == 0 {
                                continue;
                            }
                            let (a, b) = (&vals[i].0, &vals[j].0);
                            let p = Term::Iri(predicate.clone());
                            if a.predicate != p || b.predicate != p || keys[i].1 != keys[j].1 {
                                continue;
                            }
                            let same = match position {
                                Role::Subject => a.subject == b.subject,
                                Role::Object => a.object == b.object,
                            };
                            if same {
                                return false;
                            }
                        }
                    }
                }
                ConsistencyConstraint::HardRuleViolation { facts, .. } => {
                    let all = !facts.is_empty()
                        && facts
                            .iter()
                            .all(|f| (0..n).any(|i| mask & (1 << i) != 0 && &vals[i].0 == f));
                    if all {
                        return false;
                    }
                }
            }
        }
        true
    };

    let mut best: Option<(f64, u64)> = None;
    for mask in 0..(1u64 << n) {
        if !feasible(mask) {
            continue;
        }
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| vals[i].1).sum();
        let replace = match best {
            None => true,
            Some((bw, bm)) => {
                if (w - bw).abs() <= 1e-9 {
                    prefers(mask, bm, n)
                } else {
                    w > bw
                }
            }
        };
        if replace {
            best = Some((w, mask));
        }
    }
    best.map(|(w, mask)| OracleAnswer {
        atoms: (0..n).filter(|i| mask & (1 << i) != 0).map(|i| keys[i].clone()).collect(),
        weight: w,
    })
}

/// True if `a` contains the first atom (in key order) where `a` and `b` differ.
fn prefers(a: u64, b: u64, n: usize) -> bool {
    for i in 0..n {
        let (x, y) = (a & (1 << i) != 0, b & (1 << i) != 0);
        if x != y {
            return x;
        }
    }
    false
}

pub fn is_sample_of() -> Iri {
    match sosa("isSampleOf") {
        Term::Iri(i) => i,
        _ => unreachable!(),
    }
}

/// Up to `max` candidates over a few boxes and objects, weights on a 0.5
/// grid so ties are frequent and exact.
pub fn random_instance<R: Rng>(rng: &mut R, max: usize) -> (Vec<CandidateFact>, Vec<ConsistencyConstraint>) {
    let n = rng.gen_range(0..=max);
    let boxes = rng.gen_range(1..=4);
    let objs = rng.gen_range(1..=4);
    let mut cands = Vec::new();
    for _ in 0..n {
        let b = base(&format!("b{}", rng.gen_range(0..boxes)));
        let o = base(&format!("o{}", rng.gen_range(0..objs)));
        let pred = if rng.gen_bool(0.8) { sosa("isSampleOf") } else { base("near") };
        let hard = rng.gen_bool(0.05);
        cands.push(CandidateFact {
            triple: Triple::new(b, pred, o),
            timestamp: 3,
            rule_id: Iri::new(format!("http://example.org/thoth#r{}", rng.gen_range(0..3))),
            weight: if hard { f64::INFINITY } else { 0.5 * rng.gen_range(1..=6) as f64 },
            binding: Binding::new(),
        });
    }
    let mut cons = Vec::new();
    if rng.gen_bool(0.8) {
        cons.push(ConsistencyConstraint::FunctionalRole {
            predicate: is_sample_of(),
            position: Role::Subject,
        });
    }
    if rng.gen_bool(0.6) {
        cons.push(ConsistencyConstraint::FunctionalRole {
            predicate: is_sample_of(),
            position: Role::Object,
        });
    }
    if rng.gen_bool(0.3) && cands.len() >= 2 {
        let i = rng.gen_range(0..cands.len());
        let j = rng.gen_range(0..cands.len());
        cons.push(ConsistencyConstraint::HardRuleViolation {
            rule_id: Iri::new("http://example.org/thoth#ng"),
            facts: vec![cands[i].triple.clone(), cands[j].triple.clone()],
        });
    }
    (cands, cons)
}
