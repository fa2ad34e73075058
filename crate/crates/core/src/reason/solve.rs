//! Per-tick selection of the maximum-weight consistent set of candidate facts.
//!
//! Candidates are grouped into atoms by (triple, timestamp); an atom's weight
//! is the sum over the candidates that derive it, and hard candidates force
//! their atom in. The search runs per connected component of the conflict
//! structure, visiting atoms in canonical order and trying "include" first,
//! so among equal-weight optima the one that contains the canonically
//! smallest differing atom is returned.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use thiserror::Error;

use super::ground::CandidateFact;
use crate::rdf::vocab::sosa;
use crate::rdf::{Iri, Term, Triple};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Subject,
    Object,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConsistencyConstraint {
    /// At most one fact with `predicate` per value in `position` (per tick).
    FunctionalRole { predicate: Iri, position: Role },
    /// The listed facts must not all hold together.
    HardRuleViolation { rule_id: Iri, facts: Vec<Triple> },
}

impl fmt::Display for ConsistencyConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsistencyConstraint::FunctionalRole { predicate, position } => {
                write!(f, "FunctionalRole({predicate}, {position:?})")
            }
            ConsistencyConstraint::HardRuleViolation { rule_id, .. } => {
                write!(f, "HardRuleViolation({rule_id})")
            }
        }
    }
}

/// `sosa:isSampleOf` functional in both positions: one object per box and
/// one box per object.
pub fn mot_constraints() -> Vec<ConsistencyConstraint> {
    let Term::Iri(p) = sosa("isSampleOf") else { unreachable!() };
    vec![
        ConsistencyConstraint::FunctionalRole {
            predicate: p.clone(),
            position: Role::Subject,
        },
        ConsistencyConstraint::FunctionalRole {
            predicate: p,
            position: Role::Object,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("inconsistent tick: {constraint} violated by {detail}")]
    InconsistentTick { constraint: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnswerSet {
    /// Sorted by (triple, timestamp, rule).
    pub facts: Vec<CandidateFact>,
    pub total_weight: f64,
    /// False if the node budget ran out and the best set found was returned.
    pub exact: bool,
}

impl AnswerSet {
    /// Distinct (triple, timestamp) pairs, in order.
    pub fn atoms(&self) -> Vec<(Triple, u64)> {
        let mut v: Vec<(Triple, u64)> = self
            .facts
            .iter()
            .map(|f| (f.triple.clone(), f.timestamp))
            .collect();
        v.dedup();
        v
    }

    pub fn triples(&self) -> std::collections::BTreeSet<Triple> {
        self.facts.iter().map(|f| f.triple.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Solver {
    /// Search nodes allowed per component before falling back to the best
    /// set found so far.
    pub node_budget: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            node_budget: 2_000_000,
        }
    }
}

pub fn solve(
    candidates: &[CandidateFact],
    constraints: &[ConsistencyConstraint],
) -> Result<AnswerSet, SolveError> {
    Solver::default().solve(candidates, constraints)
}

struct Atom {
    key: (String, u64),
    weight: f64,
    hard: bool,
    members: Vec<usize>,
    /// Indices into `Problem::groups`.
    groups: Vec<usize>,
    /// (nogood, literal) pairs.
    literals: Vec<(usize, usize)>,
}

struct Group {
    constraint: usize,
    family: usize,
    atoms: Vec<usize>,
}

struct Nogood {
    constraint: usize,
    /// Per listed fact, the atoms carrying it.
    literals: Vec<Vec<usize>>,
}

struct State {
    group_count: Vec<u32>,
    lit_count: Vec<Vec<u32>>,
    nogood_sat: Vec<usize>,
}

impl State {
    fn can_add(&self, a: &Atom, nogoods: &[Nogood]) -> bool {
        a.groups.iter().all(|&g| self.group_count[g] == 0) && self.completes(a, nogoods).is_none()
    }

    /// The first nogood that adding `a` would make fully true.
    fn completes(&self, a: &Atom, nogoods: &[Nogood]) -> Option<usize> {
        let mut fresh: BTreeMap<usize, usize> = BTreeMap::new();
        for &(n, l) in &a.literals {
            if self.lit_count[n][l] == 0 {
                *fresh.entry(n).or_default() += 1;
            }
        }
        fresh
            .into_iter()
            .find(|&(n, k)| self.nogood_sat[n] + k == nogoods[n].literals.len())
            .map(|(n, _)| n)
    }

    fn add(&mut self, a: &Atom) {
        for &g in &a.groups {
            self.group_count[g] += 1;
        }
        for &(n, l) in &a.literals {
            if self.lit_count[n][l] == 0 {
                self.nogood_sat[n] += 1;
            }
            self.lit_count[n][l] += 1;
        }
    }

    fn remove(&mut self, a: &Atom) {
        for &g in &a.groups {
            self.group_count[g] -= 1;
        }
        for &(n, l) in &a.literals {
            self.lit_count[n][l] -= 1;
            if self.lit_count[n][l] == 0 {
                self.nogood_sat[n] -= 1;
            }
        }
    }
}

impl Solver {
    pub fn solve(
        &self,
        candidates: &[CandidateFact],
        constraints: &[ConsistencyConstraint],
    ) -> Result<AnswerSet, SolveError> {
        // Atoms in canonical order.
        let mut by_key: BTreeMap<(String, u64), Vec<usize>> = BTreeMap::new();
        for (i, c) in candidates.iter().enumerate() {
            by_key
                .entry((c.triple.to_string(), c.timestamp))
                .or_default()
                .push(i);
        }
        let mut atoms: Vec<Atom> = by_key
            .into_iter()
            .map(|(key, members)| {
                let hard = members.iter().any(|&i| candidates[i].is_hard());
                let weight = members
                    .iter()
                    .map(|&i| candidates[i].weight)
                    .filter(|w| w.is_finite())
                    .sum();
                Atom {
                    key,
                    weight,
                    hard,
                    members,
                    groups: Vec::new(),
                    literals: Vec::new(),
                }
            })
            .collect();
        let triple_of = |a: &Atom| &candidates[a.members[0]].triple;

        let mut groups: Vec<Group> = Vec::new();
        let mut nogoods: Vec<Nogood> = Vec::new();
        let mut family = 0;
        for (ci, c) in constraints.iter().enumerate() {
            match c {
                ConsistencyConstraint::FunctionalRole { predicate, position } => {
                    let mut by_value: BTreeMap<(String, u64), Vec<usize>> = BTreeMap::new();
                    for (ai, a) in atoms.iter().enumerate() {
                        let t = triple_of(a);
                        if t.predicate.as_iri() != Some(predicate) {
                            continue;
                        }
                        let v = match position {
                            Role::Subject => &t.subject,
                            Role::Object => &t.object,
                        };
                        by_value.entry((v.to_string(), a.key.1)).or_default().push(ai);
                    }
                    for (_, members) in by_value {
                        groups.push(Group {
                            constraint: ci,
                            family,
                            atoms: members,
                        });
                    }
                    family += 1;
                }
                ConsistencyConstraint::HardRuleViolation { facts, .. } => {
                    let literals: Vec<Vec<usize>> = facts
                        .iter()
                        .map(|f| {
                            (0..atoms.len())
                                .filter(|&ai| triple_of(&atoms[ai]) == f)
                                .collect()
                        })
                        .collect();
                    // A listed fact nobody derives: the nogood cannot fire.
                    if !literals.is_empty() && literals.iter().all(|l| !l.is_empty()) {
                        nogoods.push(Nogood {
                            constraint: ci,
                            literals,
                        });
                    }
                }
            }
        }
        for (gi, g) in groups.iter().enumerate() {
            for &a in &g.atoms {
                atoms[a].groups.push(gi);
            }
        }
        for (ni, n) in nogoods.iter().enumerate() {
            for (li, lit) in n.literals.iter().enumerate() {
                for &a in lit {
                    atoms[a].literals.push((ni, li));
                }
            }
        }

        let mut state = State {
            group_count: vec![0; groups.len()],
            lit_count: nogoods.iter().map(|n| vec![0; n.literals.len()]).collect(),
            nogood_sat: vec![0; nogoods.len()],
        };
        let mut chosen = vec![false; atoms.len()];

        // Forced atoms.
        for ai in 0..atoms.len() {
            if !atoms[ai].hard {
                continue;
            }
            if let Some(&g) = atoms[ai].groups.iter().find(|&&g| state.group_count[g] > 0) {
                let other = groups[g].atoms.iter().find(|&&o| chosen[o]).copied().unwrap_or(ai);
                return Err(SolveError::InconsistentTick {
                    constraint: constraints[groups[g].constraint].to_string(),
                    detail: format!(
                        "hard facts {} and {}",
                        triple_of(&atoms[other]),
                        triple_of(&atoms[ai])
                    ),
                });
            }
            if let Some(n) = state.completes(&atoms[ai], &nogoods) {
                return Err(SolveError::InconsistentTick {
                    constraint: constraints[nogoods[n].constraint].to_string(),
                    detail: format!("hard fact {}", triple_of(&atoms[ai])),
                });
            }
            state.add(&atoms[ai]);
            chosen[ai] = true;
        }

        // Components over the soft atoms that can still be added.
        let free: Vec<usize> = (0..atoms.len())
            .filter(|&a| !atoms[a].hard && state.can_add(&atoms[a], &nogoods))
            .collect();
        let mut uf = UnionFind::new(atoms.len());
        for g in &groups {
            link(&mut uf, &g.atoms, &chosen);
        }
        for n in &nogoods {
            let all: Vec<usize> = n.literals.iter().flatten().copied().collect();
            link(&mut uf, &all, &chosen);
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &a in &free {
            comps.entry(uf.find(a)).or_default().push(a);
        }

        let mut exact = true;
        for (_, comp) in comps {
            let mut search = Search {
                atoms: &atoms,
                groups: &groups,
                nogoods: &nogoods,
                order: &comp,
                families: family,
                state: &mut state,
                current: vec![false; comp.len()],
                best: None,
                nodes: 0,
                budget: self.node_budget,
            };
            search.dfs(0, 0.0);
            if search.nodes > search.budget {
                exact = false;
                warn!(
                    "solve: node budget {} exhausted on a component of {} atoms",
                    self.node_budget,
                    comp.len()
                );
            }
            if let Some((_, pick)) = search.best {
                for (k, &a) in comp.iter().enumerate() {
                    if pick[k] {
                        chosen[a] = true;
                    }
                }
            }
        }

        let mut facts: Vec<CandidateFact> = Vec::new();
        let mut total = 0.0;
        for (ai, a) in atoms.iter().enumerate() {
            if !chosen[ai] {
                continue;
            }
            total += a.weight;
            let mut members: Vec<&CandidateFact> = a.members.iter().map(|&i| &candidates[i]).collect();
            members.sort_by(|x, y| x.rule_id.cmp(&y.rule_id));
            facts.extend(members.into_iter().cloned());
        }
        Ok(AnswerSet {
            facts,
            total_weight: total,
            exact,
        })
    }
}

fn link(uf: &mut UnionFind, members: &[usize], chosen: &[bool]) {
    let mut first: Option<usize> = None;
    for &a in members {
        if chosen[a] {
            continue;
        }
        match first {
            None => first = Some(a),
            Some(f) => uf.union(f, a),
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index as root keeps component keys stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

struct Search<'s> {
    atoms: &'s [Atom],
    groups: &'s [Group],
    nogoods: &'s [Nogood],
    order: &'s [usize],
    families: usize,
    state: &'s mut State,
    current: Vec<bool>,
    best: Option<(f64, Vec<bool>)>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    /// Optimistic completion from position `k`: per functional family, at
    /// most one atom per group counts; the tightest family wins.
    fn bound(&self, k: usize) -> f64 {
        let avail: Vec<usize> = self.order[k..]
            .iter()
            .copied()
            .filter(|&a| self.atoms[a].groups.iter().all(|&g| self.state.group_count[g] == 0))
            .collect();
        let plain: f64 = avail.iter().map(|&a| self.atoms[a].weight).sum();
        let mut best = plain;
        for f in 0..self.families {
            let mut group_max: BTreeMap<usize, f64> = BTreeMap::new();
            let mut rest = 0.0;
            for &a in &avail {
                let w = self.atoms[a].weight;
                match self.atoms[a].groups.iter().find(|&&g| self.groups[g].family == f) {
                    Some(&g) => {
                        let e = group_max.entry(g).or_insert(0.0);
                        *e = e.max(w);
                    }
                    None => rest += w,
                }
            }
            best = best.min(rest + group_max.values().sum::<f64>());
        }
        best
    }

    fn dfs(&mut self, k: usize, weight: f64) {
        self.nodes += 1;
        if self.nodes > self.budget && self.best.is_some() {
            return;
        }
        if k == self.order.len() {
            let better = match &self.best {
                None => true,
                Some((b, _)) => weight > b + EPS,
            };
            if better {
                self.best = Some((weight, self.current.clone()));
            }
            return;
        }
        if let Some((b, _)) = &self.best {
            if weight + self.bound(k) <= b + EPS {
                return;
            }
        }
        let a = &self.atoms[self.order[k]];
        if self.state.can_add(a, self.nogoods) {
            self.state.add(a);
            self.current[k] = true;
            self.dfs(k + 1, weight + a.weight);
            self.current[k] = false;
            self.state.remove(a);
        }
        self.dfs(k + 1, weight);
    }
}
