//! Continuous evaluation of rule programs: grounding, filter evaluation and
//! per-tick max-weight answer selection.

pub mod engine;
pub mod eval;
pub mod ground;
pub mod select;
pub mod solve;

pub use engine::{Engine, TickOutput, DEFAULT_TICK_MS};
pub use eval::{agg_key, EvalError, Features, Value};
pub use ground::{ground, solutions, stream_set, CandidateFact, EvalContext, StreamSet};
pub use select::{evaluate_select, finish_groups, group_solutions, GroupRow, SelectResult};
pub use solve::{mot_constraints, solve, AnswerSet, ConsistencyConstraint, Role, SolveError, Solver};
