//! Identity bookkeeping against ground truth.

use std::collections::BTreeMap;

use thoth_core::rdf::Iri;

use crate::io::Assignment;
use crate::scene::GroundTruth;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MotCounts {
    /// Ground-truth boxes that received an object.
    pub matches: usize,
    /// Ground-truth boxes left unassigned.
    pub misses: usize,
    /// Times a true object's assigned identity changed.
    pub switches: usize,
}

pub fn evaluate(truth: &[GroundTruth], predicted: &[Assignment]) -> MotCounts {
    let by_box: BTreeMap<(u64, usize), &Iri> = predicted.iter().map(|a| ((a.frame, a.box_index), &a.object)).collect();
    let mut ordered: Vec<&GroundTruth> = truth.iter().collect();
    ordered.sort_by_key(|t| (t.frame, t.box_index));
    let mut last: BTreeMap<&str, &Iri> = BTreeMap::new();
    let mut c = MotCounts::default();
    for t in ordered {
        match by_box.get(&(t.frame, t.box_index)) {
            None => c.misses += 1,
            Some(&o) => {
                c.matches += 1;
                if let Some(prev) = last.insert(t.object.as_str(), o) {
                    if prev != o {
                        c.switches += 1;
                    }
                }
            }
        }
    }
    c
}

/// Object identity given to each true object at each frame.
pub fn identities(truth: &[GroundTruth], predicted: &[Assignment]) -> BTreeMap<String, Vec<(u64, Iri)>> {
    let by_box: BTreeMap<(u64, usize), &Iri> = predicted.iter().map(|a| ((a.frame, a.box_index), &a.object)).collect();
    let mut out: BTreeMap<String, Vec<(u64, Iri)>> = BTreeMap::new();
    for t in truth {
        if let Some(o) = by_box.get(&(t.frame, t.box_index)) {
            out.entry(t.object.clone()).or_default().push((t.frame, (*o).clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_switches_and_misses() {
        let gt = |f, i, o: &str| GroundTruth {
            frame: f,
            box_index: i,
            object: o.into(),
        };
        let a = |f, i, o: &str| Assignment {
            frame: f,
            box_index: i,
            object: Iri::new(o),
        };
        let truth = vec![gt(1, 0, "x"), gt(2, 0, "x"), gt(3, 0, "x"), gt(4, 0, "x")];
        let pred = vec![a(1, 0, "o1"), a(2, 0, "o1"), a(4, 0, "o2")];
        assert_eq!(
            evaluate(&truth, &pred),
            MotCounts {
                matches: 3,
                misses: 1,
                switches: 1
            }
        );
    }
}
