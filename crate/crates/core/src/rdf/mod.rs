//! RDF-star terms, knowledge graphs, timed streams and their Turtle-star text form.

pub mod graph;
pub mod stream;
pub mod term;
pub mod turtle;
pub mod vocab;

pub use graph::{graph_match, unify, Binding, KnowledgeGraph};
pub use stream::{SemanticStream, StreamError, TimedTriple};
pub use term::{Datatype, Iri, Literal, Term, Triple};
pub use turtle::{parse_turtle_star, write_timed, write_turtle, StreamStatement, TurtleError, TurtleReader};
pub use vocab::PrefixMap;
