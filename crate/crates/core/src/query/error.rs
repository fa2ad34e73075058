use std::fmt;

use crate::lexer::{LexError, Position};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    /// The parser wanted one of `expected` at this position.
    Grammar { expected: Vec<String> },
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryError {
    pub kind: ErrorKind,
    pub message: String,
    pub pos: Position,
}

impl QueryError {
    pub fn grammar(expected: Vec<String>, message: impl Into<String>, pos: Position) -> Self {
        QueryError {
            kind: ErrorKind::Grammar { expected },
            message: message.into(),
            pos,
        }
    }

    pub fn validation(message: impl Into<String>, pos: Position) -> Self {
        QueryError {
            kind: ErrorKind::Validation,
            message: message.into(),
            pos,
        }
    }

    /// Shifts a position reported inside an embedded string that starts at
    /// `origin` (the first character of the string content).
    pub fn relocate(mut self, origin: Position) -> Self {
        if self.pos.line == 1 {
            self.pos.col += origin.col - 1;
        }
        self.pos.line += origin.line - 1;
        self
    }
}

impl From<LexError> for QueryError {
    fn from(e: LexError) -> Self {
        QueryError {
            kind: ErrorKind::Lexical,
            message: e.message,
            pos: e.pos,
        }
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ErrorKind::Lexical => write!(f, "{}: lexical error: {}", self.pos, self.message),
            ErrorKind::Grammar { expected } if !expected.is_empty() => write!(
                f,
                "{}: syntax error: {} (expected one of: {})",
                self.pos,
                self.message,
                expected.join(", ")
            ),
            ErrorKind::Grammar { .. } => write!(f, "{}: syntax error: {}", self.pos, self.message),
            ErrorKind::Validation => write!(f, "{}: invalid query: {}", self.pos, self.message),
        }
    }
}

impl std::error::Error for QueryError {}

/// Renders an error list one per line.
pub fn format_errors(errors: &[QueryError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
