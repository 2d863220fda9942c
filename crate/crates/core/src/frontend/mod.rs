//! Lexing, parsing and pretty-printing of `.dl` source.

mod lexer;
mod parser;
mod pretty;

use thiserror::Error;

use crate::ast::Span;

pub use parser::parse;
pub use pretty::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub span: Span,
    pub expected: Vec<String>,
    pub found: String,
}
