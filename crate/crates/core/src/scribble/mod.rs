//! Scribble global protocols: syntax tree, parser, printer, expansion and
//! well-formedness checking.

pub mod ast;
mod dump;
mod expand;
mod lexer;
mod parser;
mod print;
mod wellformed;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use dump::dump_global;
pub use expand::{expand, expand_traced, Bindings, ExpandError, Expansion, DEPTH_SYMBOL};
pub use parser::{parse_all, parse_global};
pub use print::pretty_print;
pub use wellformed::{check_wellformed, check_with_bindings};

pub(crate) use lexer::{tokenize, Cursor, Tok};
pub(crate) use parser::{is_keyword, sorts as parse_sorts};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("duplicate role `{name}`")]
    DuplicateRole { name: String },
    #[error("unknown role `{name}` at {line}:{column}")]
    UnknownRole {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("protocol `{name}` defined more than once")]
    DuplicateProtocol { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticKind {
    UnboundContinue,
    UnguardedRecursion,
    ContinueInsidePar,
    UnreachableAfterContinue,
    UnknownRole,
    DuplicateRole,
    SelfInteraction,
    UnknownSubprotocol,
    ArityMismatch,
    UnboundSymbol,
    IndexOutOfBounds,
    ExpansionBudgetExceeded,
    ChooserNotSender,
    IndistinguishableBranches,
    UnmergeableChoice,
    ParConflict,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[cfg(test)]
mod tests;
