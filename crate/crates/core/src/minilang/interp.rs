//! Deterministic tree-walking interpreter.
//!
//! One call of a parameterless entry function is one laps. Dereferencing a
//! null receiver (field read, field write or method call) activates the
//! site's decision point and asks a [`DecisionProvider`] what to do before
//! anything crashes.

use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::ast::*;
use super::value::{ObjRef, Value};
use crate::patchmodel::{self, Decision, DecisionSequence, Directive};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

/// Maximum nesting of minilang calls before the laps is aborted.
pub const MAX_CALL_DEPTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Param,
    Local,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Param => "param",
            Origin::Local => "local",
        })
    }
}

/// One visible variable at a decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeEntry {
    pub name: String,
    pub value: Value,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Location {
    pub function: String,
    pub line: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.function, self.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuntimeErrorKind {
    DivisionByZero,
    MissingMember,
    TypeError,
    StackOverflow,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::DivisionByZero => "division-by-zero",
            RuntimeErrorKind::MissingMember => "missing-member",
            RuntimeErrorKind::TypeError => "type-error",
            RuntimeErrorKind::StackOverflow => "stack-overflow",
        })
    }
}

/// How a laps ended.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LapsOutcome {
    Success,
    OracleFailed(Location),
    UnrepairedNull(DecisionPointId),
    RuntimeError {
        kind: RuntimeErrorKind,
        location: Location,
    },
    StepBudgetExceeded,
    NeedsMoreDecisions(DecisionPointId),
}

impl LapsOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, LapsOutcome::Success)
    }

    pub fn label(&self) -> &'static str {
        match self {
            LapsOutcome::Success => "success",
            LapsOutcome::OracleFailed(_) => "oracle-failed",
            LapsOutcome::UnrepairedNull(_) => "unrepaired-null",
            LapsOutcome::RuntimeError { .. } => "runtime-error",
            LapsOutcome::StepBudgetExceeded => "step-budget-exceeded",
            LapsOutcome::NeedsMoreDecisions(_) => "needs-more-decisions",
        }
    }
}

impl fmt::Display for LapsOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LapsOutcome::Success | LapsOutcome::StepBudgetExceeded => f.write_str(self.label()),
            LapsOutcome::OracleFailed(loc) => write!(f, "oracle-failed@{loc}"),
            LapsOutcome::UnrepairedNull(p) => write!(f, "unrepaired-null@{p}"),
            LapsOutcome::RuntimeError { kind, location } => {
                write!(f, "runtime-error:{kind}@{location}")
            }
            LapsOutcome::NeedsMoreDecisions(p) => write!(f, "needs-more-decisions@{p}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutionTrace {
    pub activated: Vec<DecisionPointId>,
    pub taken: DecisionSequence,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub outcome: LapsOutcome,
    pub trace: ExecutionTrace,
}

/// Precondition failures and replay divergence; these are not laps outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecError {
    UnknownEntry(String),
    EntryTakesParameters(String),
    /// The provider chose a decision that is not in the enumeration at the point.
    Inapplicable {
        point: DecisionPointId,
        decision: Decision,
    },
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::UnknownEntry(e) => write!(f, "entry function `{e}` does not exist"),
            ExecError::EntryTakesParameters(e) => {
                write!(f, "entry function `{e}` must not take parameters")
            }
            ExecError::Inapplicable { point, decision } => {
                write!(f, "decision `{decision}` is not applicable at {point}")
            }
        }
    }
}

impl core::error::Error for ExecError {}

/// Everything a provider may look at when a point activates.
#[derive(Debug)]
pub struct DecisionRequest<'a> {
    pub point: &'a DecisionPointId,
    /// Canonical enumeration at the point; never empty.
    pub decisions: &'a [Decision],
    /// Scope snapshot at the point.
    pub scope: &'a [ScopeEntry],
    /// Number of decisions already taken in this laps.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provision {
    Apply(Decision),
    /// No decision: the original failure propagates.
    Decline,
    /// The provider has no more decisions to give (used for scripted replay).
    Exhausted,
}

pub trait DecisionProvider {
    fn provide(&mut self, request: &DecisionRequest<'_>) -> Provision;
}

impl<P: DecisionProvider + ?Sized> DecisionProvider for &mut P {
    fn provide(&mut self, request: &DecisionRequest<'_>) -> Provision {
        (**self).provide(request)
    }
}

/// Provider that never repairs anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct Unrepaired;

impl DecisionProvider for Unrepaired {
    fn provide(&mut self, _: &DecisionRequest<'_>) -> Provision {
        Provision::Decline
    }
}

enum Unwind {
    Return(Value),
    Skip,
    Halt(LapsOutcome),
    Diverged(DecisionPointId, Decision),
}

type Flow<T> = Result<T, Unwind>;

struct Frame<'p> {
    function: &'p FunDecl,
    this: Option<ObjRef>,
    scopes: Vec<Vec<(&'p str, Value, Origin)>>,
}

impl<'p> Frame<'p> {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter())
            .find(|(n, _, _)| *n == name)
            .map(|(_, v, _)| v)
    }

    fn assign(&mut self, name: &str, value: Value) {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.iter_mut().find(|(n, _, _)| *n == name) {
                slot.1 = value;
                return;
            }
        }
    }

    fn declare(&mut self, name: &'p str, value: Value) {
        self.scopes
            .last_mut()
            .expect("frame always has a scope")
            .push((name, value, Origin::Local));
    }

    /// Parameters in declaration order, then locals from the outermost block inwards.
    fn scope_snapshot(&self) -> Vec<ScopeEntry> {
        self.scopes
            .iter()
            .flat_map(|s| s.iter())
            .map(|(n, v, o)| ScopeEntry {
                name: n.to_string(),
                value: v.clone(),
                origin: *o,
            })
            .collect()
    }
}

/// Runs one laps: a call of `entry` on a fresh heap.
pub fn execute<P: DecisionProvider>(
    program: &Program,
    entry: &str,
    provider: P,
    step_budget: u64,
) -> Result<Execution, ExecError> {
    let function = program
        .function(entry)
        .ok_or_else(|| ExecError::UnknownEntry(entry.to_string()))?;
    if !function.params.is_empty() {
        return Err(ExecError::EntryTakesParameters(entry.to_string()));
    }
    let mut interp = Interp {
        program,
        provider,
        budget: step_budget,
        trace: ExecutionTrace::default(),
        depth: 0,
    };
    let outcome = match interp.call(function, None, Vec::new(), function.line) {
        Ok(_) => LapsOutcome::Success,
        Err(Unwind::Halt(outcome)) => outcome,
        Err(Unwind::Diverged(point, decision)) => {
            return Err(ExecError::Inapplicable { point, decision })
        }
        // `call` absorbs returns and skips never leave a frame.
        Err(Unwind::Return(_)) | Err(Unwind::Skip) => LapsOutcome::Success,
    };
    Ok(Execution {
        outcome,
        trace: interp.trace,
    })
}

struct Interp<'p, P> {
    program: &'p Program,
    provider: P,
    budget: u64,
    trace: ExecutionTrace,
    depth: usize,
}

impl<'p, P: DecisionProvider> Interp<'p, P> {
    fn tick(&mut self) -> Flow<()> {
        self.trace.steps += 1;
        if self.trace.steps > self.budget {
            Err(Unwind::Halt(LapsOutcome::StepBudgetExceeded))
        } else {
            Ok(())
        }
    }

    fn fault(&self, frame: &Frame<'_>, kind: RuntimeErrorKind, line: u32) -> Unwind {
        Unwind::Halt(LapsOutcome::RuntimeError {
            kind,
            location: Location {
                function: frame.function.name.clone(),
                line,
            },
        })
    }

    fn call(
        &mut self,
        function: &'p FunDecl,
        this: Option<ObjRef>,
        args: Vec<Value>,
        line: u32,
    ) -> Flow<Value> {
        self.tick()?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Unwind::Halt(LapsOutcome::RuntimeError {
                kind: RuntimeErrorKind::StackOverflow,
                location: Location {
                    function: function.name.clone(),
                    line,
                },
            }));
        }
        let params = function
            .params
            .iter()
            .zip(args)
            .map(|(p, v)| (p.name.as_str(), v, Origin::Param))
            .collect();
        let mut frame = Frame {
            function,
            this,
            scopes: vec![params],
        };
        self.depth += 1;
        let result = self.block(&mut frame, &function.body);
        self.depth -= 1;
        match result {
            Ok(()) => Ok(Value::Null),
            Err(Unwind::Return(v)) => Ok(v),
            Err(Unwind::Skip) => unreachable!("skips are absorbed by statements"),
            Err(other) => Err(other),
        }
    }

    fn block(&mut self, frame: &mut Frame<'p>, stmts: &'p [Stmt]) -> Flow<()> {
        frame.scopes.push(Vec::new());
        let depth = frame.scopes.len();
        let mut result = Ok(());
        for s in stmts {
            result = self.stmt(frame, s);
            if result.is_err() {
                break;
            }
        }
        frame.scopes.truncate(depth - 1);
        result
    }

    fn stmt(&mut self, frame: &mut Frame<'p>, stmt: &'p Stmt) -> Flow<()> {
        self.tick()?;
        match self.stmt_body(frame, stmt) {
            Err(Unwind::Skip) => Ok(()),
            other => other,
        }
    }

    fn stmt_body(&mut self, frame: &mut Frame<'p>, stmt: &'p Stmt) -> Flow<()> {
        let line = stmt.line;
        match &stmt.kind {
            StmtKind::VarDecl { name, init, .. } => {
                let value = match init {
                    Some(e) => self.eval(frame, e, line),
                    None => Ok(Value::Null),
                };
                match value {
                    Ok(v) => {
                        frame.declare(name, v);
                        Ok(())
                    }
                    // A skipped declaration still introduces the variable.
                    Err(Unwind::Skip) => {
                        frame.declare(name, Value::Null);
                        Ok(())
                    }
                    Err(e) => Err(e),
                }
            }
            StmtKind::Assign { target, value } => match target {
                AssignTarget::Var(name) => {
                    let v = self.eval(frame, value, line)?;
                    frame.assign(name, v);
                    Ok(())
                }
                AssignTarget::Field {
                    object,
                    field,
                    site,
                } => {
                    let receiver = self.eval(frame, object, line)?;
                    let obj = self.deref(frame, object, receiver, field, site, line)?;
                    let v = self.eval(frame, value, line)?;
                    if obj.set(field, v) {
                        Ok(())
                    } else {
                        Err(self.fault(frame, RuntimeErrorKind::MissingMember, line))
                    }
                }
            },
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(frame, e, line)?,
                    None => Value::Null,
                };
                Err(Unwind::Return(v))
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.condition(frame, cond, line)? {
                    self.block(frame, then_block)
                } else {
                    self.block(frame, else_block)
                }
            }
            StmtKind::While { cond, body } => {
                while self.condition(frame, cond, line)? {
                    self.block(frame, body)?;
                }
                Ok(())
            }
            StmtKind::Assert(e) => {
                if self.condition(frame, e, line)? {
                    Ok(())
                } else {
                    Err(Unwind::Halt(LapsOutcome::OracleFailed(Location {
                        function: frame.function.name.clone(),
                        line,
                    })))
                }
            }
            StmtKind::Expr(e) => self.eval(frame, e, line).map(|_| ()),
        }
    }

    fn condition(&mut self, frame: &mut Frame<'p>, e: &'p Expr, line: u32) -> Flow<bool> {
        match self.eval(frame, e, line)? {
            Value::Bool(b) => Ok(b),
            _ => Err(self.fault(frame, RuntimeErrorKind::TypeError, line)),
        }
    }

    /// Resolves a receiver to an object, consulting the provider when it is null.
    fn deref(
        &mut self,
        frame: &mut Frame<'p>,
        receiver: &Expr,
        value: Value,
        member: &str,
        site: &DecisionPointId,
        line: u32,
    ) -> Flow<ObjRef> {
        match value {
            Value::Object(o) => return Ok(o),
            Value::Null => {}
            _ => return Err(self.fault(frame, RuntimeErrorKind::TypeError, line)),
        }
        let scope = frame.scope_snapshot();
        let decisions =
            patchmodel::enumerate_decisions(site, &scope, member, frame.function, self.program);
        self.trace.activated.push(site.clone());
        let request = DecisionRequest {
            point: site,
            decisions: &decisions,
            scope: &scope,
            depth: self.trace.taken.len(),
        };
        let chosen = match self.provider.provide(&request) {
            Provision::Apply(d) => d,
            Provision::Decline => {
                return Err(Unwind::Halt(LapsOutcome::UnrepairedNull(site.clone())))
            }
            Provision::Exhausted => {
                return Err(Unwind::Halt(LapsOutcome::NeedsMoreDecisions(site.clone())))
            }
        };
        let Some(decision) = decisions.iter().find(|d| **d == chosen).cloned() else {
            return Err(Unwind::Diverged(site.clone(), chosen));
        };
        let directive = match patchmodel::apply_decision(&decision, &scope, self.program) {
            Ok(d) => d,
            Err(_) => return Err(Unwind::Diverged(site.clone(), decision)),
        };
        self.trace.taken.push(site.clone(), decision);
        match directive {
            Directive::Substitute(v) => {
                if let Expr::Var(name) = receiver {
                    frame.assign(name, v.clone());
                }
                match v {
                    Value::Object(o) => Ok(o),
                    _ => unreachable!("substitutes are always objects"),
                }
            }
            Directive::SkipStatement => Err(Unwind::Skip),
            Directive::Return(v) => Err(Unwind::Return(v)),
        }
    }

    fn eval(&mut self, frame: &mut Frame<'p>, e: &'p Expr, line: u32) -> Flow<Value> {
        self.tick()?;
        match e {
            Expr::Literal(lit) => Ok(Value::from_literal(lit)),
            Expr::Var(name) => Ok(frame.lookup(name).cloned().unwrap_or(Value::Null)),
            Expr::This => Ok(frame.this.clone().map(Value::Object).unwrap_or(Value::Null)),
            Expr::New(class) => {
                let decl = self
                    .program
                    .class(class)
                    .expect("classes resolved at parse time");
                Ok(Value::Object(ObjRef::instantiate(decl)))
            }
            Expr::Field {
                object,
                field,
                site,
            } => {
                let receiver = self.eval(frame, object, line)?;
                let obj = self.deref(frame, object, receiver, field, site, line)?;
                obj.get(field)
                    .ok_or_else(|| self.fault(frame, RuntimeErrorKind::MissingMember, line))
            }
            Expr::MethodCall {
                receiver,
                method,
                args,
                site,
            } => {
                let value = self.eval(frame, receiver, line)?;
                let obj = self.deref(frame, receiver, value, method, site, line)?;
                let class = obj.class_name();
                let callee = self
                    .program
                    .class(&class)
                    .and_then(|c| c.method(method))
                    .ok_or_else(|| self.fault(frame, RuntimeErrorKind::MissingMember, line))?;
                let args = self.args(frame, args, line)?;
                if args.len() != callee.params.len() {
                    return Err(self.fault(frame, RuntimeErrorKind::TypeError, line));
                }
                self.call(callee, Some(obj), args, line)
            }
            Expr::Call { function, args } => {
                let callee = self
                    .program
                    .function(function)
                    .expect("functions resolved at parse time");
                let args = self.args(frame, args, line)?;
                if args.len() != callee.params.len() {
                    return Err(self.fault(frame, RuntimeErrorKind::TypeError, line));
                }
                self.call(callee, None, args, line)
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(frame, operand, line)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
                    _ => Err(self.fault(frame, RuntimeErrorKind::TypeError, line)),
                }
            }
            Expr::Binary { op, lhs, rhs } => self.binary(frame, *op, lhs, rhs, line),
        }
    }

    fn args(&mut self, frame: &mut Frame<'p>, args: &'p [Expr], line: u32) -> Flow<Vec<Value>> {
        args.iter().map(|a| self.eval(frame, a, line)).collect()
    }

    fn binary(
        &mut self,
        frame: &mut Frame<'p>,
        op: BinOp,
        lhs: &'p Expr,
        rhs: &'p Expr,
        line: u32,
    ) -> Flow<Value> {
        if matches!(op, BinOp::And | BinOp::Or) {
            let l = self.condition(frame, lhs, line)?;
            if (op == BinOp::And) != l {
                return Ok(Value::Bool(l));
            }
            return self.condition(frame, rhs, line).map(Value::Bool);
        }
        let l = self.eval(frame, lhs, line)?;
        let r = self.eval(frame, rhs, line)?;
        let type_error = || self.fault(frame, RuntimeErrorKind::TypeError, line);
        Ok(match (op, &l, &r) {
            (BinOp::Eq, _, _) => Value::Bool(l == r),
            (BinOp::Ne, _, _) => Value::Bool(l != r),
            (BinOp::Add, Value::Str(_), _) | (BinOp::Add, _, Value::Str(_)) => {
                let mut s = String::new();
                use core::fmt::Write;
                let _ = write!(s, "{l}{r}");
                Value::Str(Rc::from(s.as_str()))
            }
            (_, Value::Int(a), Value::Int(b)) => {
                let (a, b) = (*a, *b);
                match op {
                    BinOp::Add => Value::Int(a.wrapping_add(b)),
                    BinOp::Sub => Value::Int(a.wrapping_sub(b)),
                    BinOp::Mul => Value::Int(a.wrapping_mul(b)),
                    BinOp::Div if b == 0 => {
                        return Err(self.fault(frame, RuntimeErrorKind::DivisionByZero, line))
                    }
                    BinOp::Div => Value::Int(a.wrapping_div(b)),
                    BinOp::Lt => Value::Bool(a < b),
                    BinOp::Gt => Value::Bool(a > b),
                    BinOp::Le => Value::Bool(a <= b),
                    BinOp::Ge => Value::Bool(a >= b),
                    BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!(),
                }
            }
            _ => return Err(type_error()),
        })
    }
}
