//! Null-dereference runtime patch model.
//!
//! Six decision families are available when a null value is about to be
//! dereferenced. Two replace the null receiver with a usable object (reuse
//! an in-scope object, or build a fresh one); four skip work instead (the
//! current statement, or the rest of the method while handing the caller
//! `null`, a fresh object or an in-scope object).
//!
//! [`enumerate_decisions`] lists the concrete decisions applicable at an
//! activated point in a fixed canonical order, and [`apply_decision`] turns a
//! chosen decision into a directive the interpreter carries out.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};
use core::str::FromStr;

use crate::minilang::{DecisionPointId, FunDecl, ObjRef, Program, ScopeEntry, Value};

/// One decision family together with its payload.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Inject an existing compatible object taken from a variable in scope.
    ReplaceReuse(String),
    /// Inject a freshly constructed object of the named class.
    ReplaceNew(String),
    /// Abandon the statement containing the dereference.
    SkipLine,
    /// Leave the method, handing `null` to the caller.
    ReturnNull,
    /// Leave the method, handing a fresh object of the named class to the caller.
    ReturnNew(String),
    /// Leave the method, handing the value of an in-scope variable to the caller.
    ReturnVar(String),
}

impl Strategy {
    pub fn family(&self) -> &'static str {
        match self {
            Strategy::ReplaceReuse(_) => "ReplaceReuse",
            Strategy::ReplaceNew(_) => "ReplaceNew",
            Strategy::SkipLine => "SkipLine",
            Strategy::ReturnNull => "ReturnNull",
            Strategy::ReturnNew(_) => "ReturnNew",
            Strategy::ReturnVar(_) => "ReturnVar",
        }
    }

    pub fn payload(&self) -> Option<&str> {
        match self {
            Strategy::ReplaceReuse(p)
            | Strategy::ReplaceNew(p)
            | Strategy::ReturnNew(p)
            | Strategy::ReturnVar(p) => Some(p),
            Strategy::SkipLine | Strategy::ReturnNull => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.payload() {
            Some(p) => write!(f, "{}:{}", self.family(), p),
            None => f.write_str(self.family()),
        }
    }
}

impl FromStr for Strategy {
    type Err = SerializationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (family, payload) = match s.split_once(':') {
            Some((f, p)) if !p.is_empty() => (f, Some(p.to_string())),
            Some(_) => return Err(SerializationError(s.to_string())),
            None => (s, None),
        };
        let strategy = match (family, payload) {
            ("ReplaceReuse", Some(p)) => Strategy::ReplaceReuse(p),
            ("ReplaceNew", Some(p)) => Strategy::ReplaceNew(p),
            ("SkipLine", None) => Strategy::SkipLine,
            ("ReturnNull", None) => Strategy::ReturnNull,
            ("ReturnNew", Some(p)) => Strategy::ReturnNew(p),
            ("ReturnVar", Some(p)) => Strategy::ReturnVar(p),
            _ => return Err(SerializationError(s.to_string())),
        };
        Ok(strategy)
    }
}

/// A concrete decision at an activated point.
///
/// `index` is the decision's position in the canonical enumeration where it
/// was produced. It is positional metadata only: equality, ordering and
/// hashing look at the strategy alone, so the same alteration taken in two
/// laps with differently sized scopes is the same decision.
#[derive(Debug, Clone)]
pub struct Decision {
    pub strategy: Strategy,
    pub index: usize,
}

impl Decision {
    pub fn new(strategy: Strategy, index: usize) -> Self {
        Decision { strategy, index }
    }
}

impl PartialEq for Decision {
    fn eq(&self, other: &Self) -> bool {
        self.strategy == other.strategy
    }
}

impl Eq for Decision {}

impl PartialOrd for Decision {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decision {
    fn cmp(&self, other: &Self) -> Ordering {
        self.strategy.cmp(&other.strategy)
    }
}

impl Hash for Decision {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.strategy.hash(state);
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.strategy)
    }
}

/// A decision bound to the point where it was taken.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub point: DecisionPointId,
    pub decision: Decision,
}

/// Text form: `strategy:payload@function/stmtPath/exprIdx`.
impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.decision, self.point)
    }
}

impl FromStr for Step {
    type Err = SerializationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (strategy, point) = s
            .split_once('@')
            .ok_or_else(|| SerializationError(s.to_string()))?;
        Ok(Step {
            point: point
                .parse()
                .map_err(|_| SerializationError(s.to_string()))?,
            // Indices are not part of the text form.
            decision: Decision::new(strategy.parse()?, 0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializationError(pub String);

impl fmt::Display for SerializationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed decision text `{}`", self.0)
    }
}

impl core::error::Error for SerializationError {}

/// The ordered decisions taken within one laps.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecisionSequence(pub Vec<Step>);

impl DecisionSequence {
    pub fn new() -> Self {
        DecisionSequence(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, point: DecisionPointId, decision: Decision) {
        self.0.push(Step { point, decision });
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn first_point(&self) -> Option<&DecisionPointId> {
        self.0.first().map(|s| &s.point)
    }

    pub fn starts_with(&self, prefix: &[Step]) -> bool {
        self.0.starts_with(prefix)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|s| s.to_string()).collect()
    }
}

/// Steps joined by `;`. The empty sequence renders as an empty string.
impl fmt::Display for DecisionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for DecisionSequence {
    type Err = SerializationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(DecisionSequence::new());
        }
        s.split(';')
            .map(|part| part.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(DecisionSequence)
    }
}

impl FromIterator<Step> for DecisionSequence {
    fn from_iter<I: IntoIterator<Item = Step>>(iter: I) -> Self {
        DecisionSequence(iter.into_iter().collect())
    }
}

/// A decision sequence validated by the laps oracle, with its record.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimePatch {
    pub sequence: DecisionSequence,
    pub applications: u64,
    pub successes: u64,
    /// 1-based index of the laps in which the patch was first validated.
    pub discovery_laps: u64,
}

impl RuntimePatch {
    pub fn discovered(sequence: DecisionSequence, laps: u64) -> Self {
        RuntimePatch {
            sequence,
            applications: 1,
            successes: 1,
            discovery_laps: laps,
        }
    }

    pub fn size(&self) -> usize {
        self.sequence.len()
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.applications as f64
    }
}

fn class_of(value: &Value) -> Option<alloc::rc::Rc<str>> {
    value.as_object().map(ObjRef::class_name)
}

/// Lists the decisions applicable at an activated point, in canonical order:
///
/// 1. `ReplaceReuse` for each non-null in-scope object whose class declares
///    `member`, in scope order;
/// 2. `ReplaceNew` for each class declaring `member`, in declaration order;
/// 3. `SkipLine`;
/// 4. `ReturnNull`;
/// 5. `ReturnNew` when the enclosing function returns a declared class;
/// 6. `ReturnVar` for each non-null in-scope object of that return class.
///
/// The list always contains `SkipLine` and `ReturnNull`.
pub fn enumerate_decisions(
    _point: &DecisionPointId,
    scope: &[ScopeEntry],
    member: &str,
    function: &FunDecl,
    program: &Program,
) -> Vec<Decision> {
    let mut out: Vec<Strategy> = Vec::new();

    for entry in scope {
        if let Some(class) = class_of(&entry.value) {
            if program.class(&class).is_some_and(|c| c.declares(member)) {
                out.push(Strategy::ReplaceReuse(entry.name.clone()));
            }
        }
    }
    for class in program.classes.iter().filter(|c| c.declares(member)) {
        out.push(Strategy::ReplaceNew(class.name.clone()));
    }
    out.push(Strategy::SkipLine);
    out.push(Strategy::ReturnNull);

    let return_class = function
        .return_type
        .as_ref()
        .and_then(|t| t.class_name())
        .filter(|c| program.class(c).is_some());
    if let Some(rc) = return_class {
        out.push(Strategy::ReturnNew(rc.to_string()));
        for entry in scope {
            if class_of(&entry.value).is_some_and(|c| &*c == rc) {
                out.push(Strategy::ReturnVar(entry.name.clone()));
            }
        }
    }

    out.into_iter()
        .enumerate()
        .map(|(i, s)| Decision::new(s, i))
        .collect()
}

/// What the interpreter must do after a decision.
#[derive(Debug, Clone)]
pub enum Directive {
    /// Use this object in place of the null receiver and carry on.
    Substitute(Value),
    /// Abandon the current statement.
    SkipStatement,
    /// Unwind the current frame, returning this value.
    Return(Value),
}

/// The decision's payload no longer matches the state at the point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inapplicable {
    pub decision: Strategy,
}

impl fmt::Display for Inapplicable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "decision `{}` is not applicable here", self.decision)
    }
}

impl core::error::Error for Inapplicable {}

/// Turns a decision into an interpreter directive.
///
/// Replacement and return-new decisions construct objects by default
/// construction. Rebinding the originating variable after a replacement is
/// the interpreter's job, since only it knows the receiver expression.
pub fn apply_decision(
    decision: &Decision,
    scope: &[ScopeEntry],
    program: &Program,
) -> Result<Directive, Inapplicable> {
    let inapplicable = || Inapplicable {
        decision: decision.strategy.clone(),
    };
    let lookup = |name: &str| {
        scope
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value.clone())
            .filter(|v| v.as_object().is_some())
            .ok_or_else(inapplicable)
    };
    let fresh = |class: &str| {
        program
            .class(class)
            .map(|c| Value::Object(ObjRef::instantiate(c)))
            .ok_or_else(inapplicable)
    };
    Ok(match &decision.strategy {
        Strategy::ReplaceReuse(var) => Directive::Substitute(lookup(var)?),
        Strategy::ReplaceNew(class) => Directive::Substitute(fresh(class)?),
        Strategy::SkipLine => Directive::SkipStatement,
        Strategy::ReturnNull => Directive::Return(Value::Null),
        Strategy::ReturnNew(class) => Directive::Return(fresh(class)?),
        Strategy::ReturnVar(var) => Directive::Return(lookup(var)?),
    })
}
