use alloc::string::{String, ToString};
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    /// Two declarations share a name in the same namespace.
    DuplicateName {
        kind: &'static str,
        name: String,
        line: u32,
    },
    /// A class, function, type or variable reference that does not resolve.
    UnresolvedName {
        kind: &'static str,
        name: String,
        line: u32,
    },
}

impl ParseError {
    pub(crate) fn syntax(line: u32, col: u32, message: impl ToString) -> Self {
        ParseError::Syntax {
            line,
            col,
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> u32 {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::DuplicateName { line, .. }
            | ParseError::UnresolvedName { line, .. } => *line,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, col, message } => {
                write!(f, "syntax error at {line}:{col}: {message}")
            }
            ParseError::DuplicateName { kind, name, line } => {
                write!(f, "duplicate {kind} `{name}` at line {line}")
            }
            ParseError::UnresolvedName { kind, name, line } => {
                write!(f, "unresolved {kind} `{name}` at line {line}")
            }
        }
    }
}

impl core::error::Error for ParseError {}
