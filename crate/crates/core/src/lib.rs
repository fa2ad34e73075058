pub mod geometry;
pub mod learn;
pub mod lexer;
pub mod query;
pub mod reason;
pub mod rdf;
