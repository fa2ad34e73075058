use log::info;

use super::ground::{ground, solutions, CandidateFact, EvalContext, StreamSet};
use super::solve::{AnswerSet, ConsistencyConstraint, SolveError, Solver};
use crate::query::{Rule, RuleKind};
use crate::rdf::{Iri, KnowledgeGraph, TimedTriple};

pub const DEFAULT_TICK_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub answer: AnswerSet,
    /// Head facts appended to the output this tick, by (timestamp, triple).
    pub emitted: Vec<TimedTriple>,
}

/// A rule program evaluated once per tick. Chosen head facts accumulate in
/// the output log.
#[derive(Debug, Clone)]
pub struct Engine {
    program: Vec<Rule>,
    constraints: Vec<ConsistencyConstraint>,
    tick_ms: u64,
    solver: Solver,
    output: Vec<TimedTriple>,
}

impl Engine {
    pub fn new(program: Vec<Rule>) -> Self {
        Engine {
            program,
            constraints: Vec::new(),
            tick_ms: DEFAULT_TICK_MS,
            solver: Solver::default(),
            output: Vec::new(),
        }
    }

    pub fn with_constraints(mut self, c: Vec<ConsistencyConstraint>) -> Self {
        self.constraints = c;
        self
    }

    /// Milliseconds per tick, used to turn window widths into ticks.
    pub fn with_tick_ms(mut self, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick length must be positive");
        self.tick_ms = tick_ms;
        self
    }

    pub fn with_solver(mut self, s: Solver) -> Self {
        self.solver = s;
        self
    }

    pub fn program(&self) -> &[Rule] {
        &self.program
    }

    pub fn constraints(&self) -> &[ConsistencyConstraint] {
        &self.constraints
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    /// Sets a soft rule's weight. Returns false for unknown or hard rules.
    pub fn set_weight(&mut self, id: &Iri, w: f64) -> bool {
        match self.program.iter_mut().find(|r| &r.id == id) {
            Some(Rule {
                kind: RuleKind::Soft { weight },
                ..
            }) => {
                *weight = w;
                true
            }
            _ => false,
        }
    }

    pub fn output(&self) -> &[TimedTriple] {
        &self.output
    }

    pub fn clear_output(&mut self) {
        self.output.clear();
    }

    /// Grounds every rule at `now`. A hard rule with an empty head is an
    /// integrity constraint: any solution makes the tick inconsistent.
    pub fn ground_all(
        &self,
        streams: &StreamSet,
        graph: &KnowledgeGraph,
        now: u64,
    ) -> Result<Vec<Vec<CandidateFact>>, SolveError> {
        let ctx = EvalContext::new(streams, graph, now, self.tick_ms);
        let mut out = Vec::with_capacity(self.program.len());
        for r in &self.program {
            if !r.is_soft() && r.head().is_empty() {
                if let Some(b) = solutions(&r.query, &ctx).first() {
                    return Err(SolveError::InconsistentTick {
                        constraint: format!("HardRuleViolation({})", r.id),
                        detail: format!("body satisfied by {b}"),
                    });
                }
                out.push(Vec::new());
                continue;
            }
            out.push(ground(r, &ctx));
        }
        Ok(out)
    }

    /// Ground, solve, and append the chosen heads to the output.
    pub fn evaluate_tick(
        &mut self,
        streams: &StreamSet,
        graph: &KnowledgeGraph,
        now: u64,
    ) -> Result<TickOutput, SolveError> {
        let per_rule = self.ground_all(streams, graph, now)?;
        let all: Vec<CandidateFact> = per_rule.iter().flatten().cloned().collect();
        let answer = self.solver.solve(&all, &self.constraints)?;
        for (r, cands) in self.program.iter().zip(&per_rule) {
            let chosen = answer.facts.iter().filter(|f| f.rule_id == r.id).count();
            info!(
                "tick={now} rule={} candidates={} chosen={chosen}",
                r.id,
                cands.len()
            );
        }
        let mut emitted: Vec<TimedTriple> = answer
            .atoms()
            .into_iter()
            .map(|(t, ts)| TimedTriple::new(t, ts))
            .collect();
        emitted.sort_by(|a, b| {
            (a.timestamp, a.triple.to_string()).cmp(&(b.timestamp, b.triple.to_string()))
        });
        self.output.extend(emitted.iter().cloned());
        Ok(TickOutput { answer, emitted })
    }
}
