//! The `.jv` problem description language: lexer, parser, serializer, semantic
//! elaboration into library objects, the check pipeline and its reports.

pub mod ast;
pub mod fixtures;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod report;
pub mod serialize;

use std::fmt;

pub use model::Model;
pub use parser::{parse, parse_expression};
pub use pipeline::{run_check, Options};
pub use report::{Check, Report, Status};

/// A syntax or semantic error at a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    /// Acceptable tokens at this position; empty for semantic errors.
    pub expected: Vec<String>,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, expected: Vec<String>, message: String) -> Self {
        Self {
            line,
            col,
            expected,
            message,
        }
    }

    pub fn semantic(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self::new(line, col, Vec::new(), message.into())
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match self.expected.as_slice() {
            [] => write!(f, "{}", self.message),
            [one] => write!(f, "expected {one}, {}", self.message),
            many => write!(f, "expected one of {}, {}", many.join(", "), self.message),
        }
    }
}

impl std::error::Error for ParseError {}

/// Parses and elaborates source text.
pub fn load(src: &str) -> Result<Model, ParseError> {
    Model::build(&parse(src)?)
}
