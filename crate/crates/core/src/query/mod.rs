//! The continuous query and rule dialect: AST, parser, validator, printer.

pub mod ast;
pub mod error;
pub mod parser;
pub mod rules;
pub mod serialize;
pub mod validate;

pub use ast::*;
pub use error::{format_errors, ErrorKind, QueryError};
pub use parser::{parse_query, parse_query_with};
pub use rules::parse_rule_document;
pub use serialize::{serialize_ast, serialize_query, serialize_rule, serialize_rules, Canonical};
