//! Perceptron-style learning of soft-rule weights from labelled ticks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use crate::query::{Pattern, Predicate, Rule, RuleKind};
use crate::rdf::graph::unify_triple;
use crate::rdf::{Binding, Iri, KnowledgeGraph, StreamError, Triple, TurtleError, TurtleReader};
use crate::reason::{stream_set, AnswerSet, Engine, SolveError, StreamSet};

pub const MIN_WEIGHT: f64 = 0.01;

/// One labelled tick.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub streams: StreamSet,
    pub graph: KnowledgeGraph,
    pub now: u64,
    pub truth: BTreeSet<Triple>,
}

pub type WeightVector = BTreeMap<Iri, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub weights: WeightVector,
    pub converged: bool,
    /// Total loss per epoch.
    pub loss_history: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("learning rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("sample {index}: fact {fact} matches no rule head")]
    UnknownFact { index: usize, fact: String },
    #[error("sample {index}: {source}")]
    Solve {
        index: usize,
        #[source]
        source: SolveError,
    },
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
}

/// `|answer Δ truth|` over triples.
pub fn loss(answer: &AnswerSet, truth: &BTreeSet<Triple>) -> usize {
    answer.triples().symmetric_difference(truth).count()
}

pub fn weights_of(program: &[Rule]) -> WeightVector {
    program
        .iter()
        .filter_map(|r| r.weight().map(|w| (r.id.clone(), w)))
        .collect()
}

/// Every soft weight set to 1.0.
pub fn uniform_weights(program: &mut [Rule]) {
    for r in program {
        if let RuleKind::Soft { weight } = &mut r.kind {
            *weight = 1.0;
        }
    }
}

fn head_triple(p: &Pattern) -> Option<Triple> {
    match p {
        Pattern::Triple(tp) => match &tp.predicate {
            Predicate::Term(pred) => Some(Triple::new(
                tp.subject.clone(),
                pred.clone(),
                tp.object.clone(),
            )),
            Predicate::Sequence(_) => None,
        },
        Pattern::Occurrence { triple, .. } => Some(triple.clone()),
    }
}

/// Rejects samples whose truth contains a fact no head template can produce.
pub fn check_samples(program: &[Rule], samples: &[TrainingSample]) -> Result<(), LearnError> {
    let heads: Vec<Triple> = program
        .iter()
        .flat_map(|r| r.head().iter().filter_map(head_triple))
        .collect();
    for (index, s) in samples.iter().enumerate() {
        for f in &s.truth {
            if !heads.iter().any(|h| unify_triple(h, f, &mut Binding::new())) {
                return Err(LearnError::UnknownFact {
                    index,
                    fact: f.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Runs up to `max_iters` epochs over the samples in order. After each
/// sample with non-zero loss, every soft rule moves by
/// `lr * (uses in truth - uses in answer)`, clamped to [`MIN_WEIGHT`].
/// Stops at the first epoch with zero total loss.
pub fn train(
    engine: &mut Engine,
    samples: &[TrainingSample],
    lr: f64,
    max_iters: usize,
) -> Result<TrainResult, LearnError> {
    if !(lr > 0.0) {
        return Err(LearnError::NonPositiveRate(lr));
    }
    check_samples(engine.program(), samples)?;
    let soft: Vec<Iri> = engine
        .program()
        .iter()
        .filter(|r| r.is_soft())
        .map(|r| r.id.clone())
        .collect();
    let mut history = Vec::new();
    let mut converged = false;
    for epoch in 0..max_iters.max(1) {
        let mut total = 0;
        for (index, s) in samples.iter().enumerate() {
            let per_rule = engine
                .ground_all(&s.streams, &s.graph, s.now)
                .map_err(|source| LearnError::Solve { index, source })?;
            let all: Vec<_> = per_rule.iter().flatten().cloned().collect();
            let answer = crate::reason::solve(&all, engine.constraints())
                .map_err(|source| LearnError::Solve { index, source })?;
            let l = loss(&answer, &s.truth);
            total += l;
            if l == 0 {
                continue;
            }
            let mut weights = weights_of(engine.program());
            for id in &soft {
                let in_truth = all
                    .iter()
                    .filter(|c| &c.rule_id == id && s.truth.contains(&c.triple))
                    .count() as f64;
                let in_answer = answer.facts.iter().filter(|c| &c.rule_id == id).count() as f64;
                let w = weights.get_mut(id).expect("soft rule has a weight");
                *w = (*w + lr * (in_truth - in_answer)).max(MIN_WEIGHT);
                engine.set_weight(id, *w);
            }
        }
        info!("epoch={epoch} loss={total}");
        history.push(total);
        if total == 0 {
            converged = true;
            break;
        }
    }
    Ok(TrainResult {
        weights: weights_of(engine.program()),
        converged,
        loss_history: history,
    })
}

/// Reads a manifest of `<input> <truth> <now> [<static>]` lines (paths
/// relative to the manifest; `#` starts a comment). Inputs are timed
/// documents; truth and static files are plain Turtle-star.
pub fn load_samples(manifest: &Path, default_stream: &Iri) -> Result<Vec<TrainingSample>, LearnError> {
    let load_err = |path: &Path, message: String| LearnError::Load {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(manifest).map_err(|e| load_err(manifest, e.to_string()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let reader = TurtleReader::default();
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| load_err(p, e.to_string()));
    let turtle = |p: &Path, e: TurtleError| load_err(p, format!("{} at {}", e, e.position()));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(load_err(manifest, format!("line {}: want 3 or 4 fields", n + 1)));
        }
        let input = base.join(fields[0]);
        let truth_path = base.join(fields[1]);
        let now: u64 = fields[2]
            .parse()
            .map_err(|_| load_err(manifest, format!("line {}: bad tick '{}'", n + 1, fields[2])))?;
        let stmts = reader
            .parse_timed(&read(&input)?, default_stream)
            .map_err(|e| turtle(&input, e))?;
        let streams = stream_set(&stmts).map_err(|e: StreamError| load_err(&input, e.to_string()))?;
        let truth = reader
            .parse(&read(&truth_path)?)
            .map_err(|e| turtle(&truth_path, e))?
            .into_iter()
            .collect();
        let graph = match fields.get(3) {
            Some(g) => {
                let p = base.join(g);
                reader.parse(&read(&p)?).map_err(|e| turtle(&p, e))?.into_iter().collect()
            }
            None => KnowledgeGraph::new(),
        };
        out.push(TrainingSample {
            streams,
            graph,
            now,
            truth,
        });
    }
    Ok(out)
}
