//! Desk-scale learning instances whose labels come from a hidden weight
//! vector, plus a grid search that certifies separability.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use thoth_core::learn::{loss, TrainingSample};
use thoth_core::query::{parse_rule_document, Rule};
use thoth_core::rdf::vocab::{base, sosa};
use thoth_core::rdf::{Iri, KnowledgeGraph, SemanticStream, TimedTriple, Triple};
use thoth_core::reason::{solve, ConsistencyConstraint, Engine, Role, StreamSet};

pub const NOW: u64 = 1;

/// Rule `k` proposes object `:ok` for every box showing cue `:ck`.
pub fn cue_program(rules: usize) -> Vec<Rule> {
    let mut doc = String::new();
    for k in 0..rules {
        doc.push_str(&format!(
            "ssr:cue{k} a sh:NodeShape ;\n  sh:rule [ a sh:CQELSRule ; sh:construct \"\"\"\n    CONSTRUCT {{ ?B sosa:isSampleOf :o{k} . }}\n    WHERE {{ STREAM <:ssr> {{ ?B :cue :c{k} . }} }}\"\"\" ] ;\n  ssr:weight 1.0 .\n"
        ));
    }
    parse_rule_document(&doc).unwrap()
}

pub fn one_object_per_box() -> Vec<ConsistencyConstraint> {
    vec![ConsistencyConstraint::FunctionalRole {
        predicate: Iri::new(format!("{}isSampleOf", thoth_core::rdf::vocab::SOSA)),
        position: Role::Subject,
    }]
}

/// Samples with 1..=3 boxes, each showing a random non-empty cue subset;
/// truth assigns each box the cue with the largest hidden weight.
pub fn separable_samples<R: Rng>(rng: &mut R, rules: usize, count: usize, hidden: &[f64]) -> Vec<TrainingSample> {
    let stream = Iri::new("http://example.org/thoth#ssr");
    (0..count)
        .map(|i| {
            let mut s = SemanticStream::new(stream.clone());
            let mut truth = BTreeSet::new();
            for b in 0..rng.gen_range(1..=3) {
                let bx = base(&format!("s{i}b{b}"));
                let mut cues: Vec<usize> = (0..rules).collect();
                cues.shuffle(rng);
                cues.truncate(rng.gen_range(1..=rules));
                cues.sort();
                for &c in &cues {
                    s.push(TimedTriple::new(Triple::new(bx.clone(), base("cue"), base(&format!("c{c}"))), NOW))
                        .unwrap();
                }
                let best = *cues
                    .iter()
                    .max_by(|a, b| hidden[**a].partial_cmp(&hidden[**b]).unwrap())
                    .unwrap();
                truth.insert(Triple::new(bx, sosa("isSampleOf"), base(&format!("o{best}"))));
            }
            let mut streams = StreamSet::new();
            streams.insert(stream.clone(), s);
            TrainingSample {
                streams,
                graph: KnowledgeGraph::new(),
                now: NOW,
                truth,
            }
        })
        .collect()
}

/// Total loss of a weight vector.
pub fn total_loss(program: &[Rule], cons: &[ConsistencyConstraint], samples: &[TrainingSample], w: &[f64]) -> usize {
    let mut engine = Engine::new(program.to_vec()).with_constraints(cons.to_vec());
    for (r, x) in program.iter().zip(w) {
        engine.set_weight(&r.id, *x);
    }
    samples
        .iter()
        .map(|s| {
            let cands: Vec<_> = engine
                .ground_all(&s.streams, &s.graph, s.now)
                .unwrap()
                .into_iter()
                .flatten()
                .collect();
            loss(&solve(&cands, cons).unwrap(), &s.truth)
        })
        .sum()
}

/// Some zero-loss vector on the grid {0.5, 1.0, ..., 3.0}^k, if any.
pub fn grid_witness(program: &[Rule], cons: &[ConsistencyConstraint], samples: &[TrainingSample]) -> Option<Vec<f64>> {
    let grid: Vec<f64> = (1..=6).map(|i| i as f64 * 0.5).collect();
    let k = program.len();
    let mut idx = vec![0usize; k];
    loop {
        let w: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        if total_loss(program, cons, samples, &w) == 0 {
            return Some(w);
        }
        let mut d = 0;
        loop {
            if d == k {
                return None;
            }
            idx[d] += 1;
            if idx[d] < grid.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
