//! Parsing, name resolution, and pretty-printing.

mod lexer;
mod parser;
mod pretty;
mod resolve;

pub use pretty::{dist_text, expr_text, lvalue_text, pretty, pretty_stmts, type_text};
pub use resolve::{resolve, SemType, SymbolTable, VarInfo};

use crate::ast::{Program, Span};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("lexical error: {message}")]
    Lexical { span: Span, message: String },
    #[error("syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("duplicate declaration of `{name}`")]
    DuplicateDeclaration { span: Span, name: String },
    #[error("`{name}` is used before it is declared")]
    UseBeforeDeclaration { span: Span, name: String },
    #[error("type error: {message}")]
    Typing { span: Span, message: String },
}

impl ParseError {
    pub fn lexical(span: Span, message: String) -> Self {
        ParseError::Lexical { span, message }
    }

    pub fn syntax(span: Span, message: String) -> Self {
        ParseError::Syntax { span, message }
    }

    pub fn duplicate(span: Span, name: String) -> Self {
        ParseError::DuplicateDeclaration { span, name }
    }

    pub fn undeclared(span: Span, name: String) -> Self {
        ParseError::UseBeforeDeclaration { span, name }
    }

    pub fn typing(span: Span, message: String) -> Self {
        ParseError::Typing { span, message }
    }

    pub fn span(&self) -> Span {
        match self {
            ParseError::Lexical { span, .. }
            | ParseError::Syntax { span, .. }
            | ParseError::DuplicateDeclaration { span, .. }
            | ParseError::UseBeforeDeclaration { span, .. }
            | ParseError::Typing { span, .. } => *span,
        }
    }
}

/// Converts a byte offset into a 1-based (line, column) pair.
pub fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let mut line = 1;
    let mut col = 1;
    for (i, c) in source.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Parses and resolves a program. The returned AST has passed name
/// resolution and base-type checking.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let program = parser::parse_program(source)?;
    resolve::resolve(&program)?;
    Ok(program)
}
