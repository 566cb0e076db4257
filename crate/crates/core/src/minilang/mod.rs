//! The minilang front end and interpreter.
//!
//! A small imperative language with classes, nullable object references and
//! `assert` statements. Programs are parsed once and then run any number of
//! times; every run is deterministic given the decisions its provider makes.

mod ast;
mod error;
mod interp;
mod lexer;
mod parser;
mod value;

pub use ast::*;
pub use error::ParseError;
pub use interp::{
    execute, DecisionProvider, DecisionRequest, ExecError, Execution, ExecutionTrace, LapsOutcome,
    Location, Origin, Provision, RuntimeErrorKind, ScopeEntry, Unrepaired, DEFAULT_STEP_BUDGET,
    MAX_CALL_DEPTH,
};
pub use parser::{parse, parse_named};
pub use value::{ObjRef, Value};
