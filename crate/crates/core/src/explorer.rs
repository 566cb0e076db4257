//! Exhaustive exploration of the repair search space.
//!
//! The complete decision tree is built by replaying the laps from its start
//! with a forced decision script. When the script runs out at a newly
//! activated point, the search branches over that point's whole canonical
//! enumeration. Every root-to-leaf path is one decision sequence.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::minilang::{
    execute, DecisionPointId, DecisionProvider, DecisionRequest, ExecError, ExecutionTrace,
    LapsOutcome, Program, Provision,
};
use crate::patchmodel::{Decision, DecisionSequence, Step};

/// Default leaf cap for [`explore_exhaustive`].
pub const DEFAULT_SEQUENCE_CAP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayError {
    Exec(ExecError),
    /// The script expected one point but the program activated another.
    PointMismatch {
        position: usize,
        expected: DecisionPointId,
        actual: DecisionPointId,
    },
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayError::Exec(e) => write!(f, "{e}"),
            ReplayError::PointMismatch {
                position,
                expected,
                actual,
            } => write!(
                f,
                "script step {position} expected point {expected} but {actual} was activated"
            ),
        }
    }
}

impl core::error::Error for ReplayError {}

impl From<ExecError> for ReplayError {
    fn from(e: ExecError) -> Self {
        ReplayError::Exec(e)
    }
}

/// Forced-script provider: hands out the script's decisions in order.
#[derive(Debug, Clone)]
pub struct ScriptProvider<'s> {
    script: &'s [Step],
    position: usize,
    mismatch: Option<(usize, DecisionPointId)>,
    pending: Option<Vec<Decision>>,
}

impl<'s> ScriptProvider<'s> {
    pub fn new(script: &'s [Step]) -> Self {
        ScriptProvider {
            script,
            position: 0,
            mismatch: None,
            pending: None,
        }
    }

    /// Enumeration at the point where the script ran out, if it did.
    pub fn pending(&self) -> Option<&[Decision]> {
        self.pending.as_deref()
    }
}

impl DecisionProvider for ScriptProvider<'_> {
    fn provide(&mut self, request: &DecisionRequest<'_>) -> Provision {
        match self.script.get(self.position) {
            Some(step) if step.point == *request.point => {
                self.position += 1;
                Provision::Apply(step.decision.clone())
            }
            Some(_) => {
                self.mismatch = Some((self.position, request.point.clone()));
                Provision::Decline
            }
            None => {
                self.pending = Some(request.decisions.to_vec());
                Provision::Exhausted
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub outcome: LapsOutcome,
    pub trace: ExecutionTrace,
    /// Script steps that were never consumed.
    pub unused: Vec<Step>,
}

/// Executes one laps with a forced decision script.
pub fn replay(
    program: &Program,
    entry: &str,
    script: &DecisionSequence,
    step_budget: u64,
) -> Result<Replay, ReplayError> {
    replay_steps(program, entry, script.steps(), step_budget).map(|(r, _)| r)
}

fn replay_steps(
    program: &Program,
    entry: &str,
    script: &[Step],
    step_budget: u64,
) -> Result<(Replay, Option<Vec<Decision>>), ReplayError> {
    let mut provider = ScriptProvider::new(script);
    let execution = execute(program, entry, &mut provider, step_budget)?;
    if let Some((position, actual)) = provider.mismatch {
        return Err(ReplayError::PointMismatch {
            position,
            expected: script[position].point.clone(),
            actual,
        });
    }
    let unused = script[provider.position..].to_vec();
    Ok((
        Replay {
            outcome: execution.outcome,
            trace: execution.trace,
            unused,
        },
        provider.pending,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub point: DecisionPointId,
    /// In canonical enumeration order.
    pub children: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub decision: Decision,
    pub child: Child,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Child {
    Node(Node),
    Leaf(LapsOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    /// `None` when the laps never activates a decision point.
    pub root: Option<Node>,
    /// Outcome of the unmodified laps when no point activates.
    pub baseline: Option<LapsOutcome>,
    /// Activations per static point, summed over the final run of every leaf.
    pub activations: BTreeMap<DecisionPointId, u64>,
}

impl DecisionTree {
    /// Every leaf as (decision sequence, outcome), depth-first in canonical order.
    pub fn leaves(&self) -> Vec<(DecisionSequence, &LapsOutcome)> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            let mut path = Vec::new();
            collect_leaves(root, &mut path, &mut out);
        }
        out
    }
}

fn collect_leaves<'t>(
    node: &'t Node,
    path: &mut Vec<Step>,
    out: &mut Vec<(DecisionSequence, &'t LapsOutcome)>,
) {
    for branch in &node.children {
        path.push(Step {
            point: node.point.clone(),
            decision: branch.decision.clone(),
        });
        match &branch.child {
            Child::Leaf(outcome) => out.push((DecisionSequence(path.clone()), outcome)),
            Child::Node(n) => collect_leaves(n, path, out),
        }
        path.pop();
    }
}

/// Size, fertility and patch-size summary of a search space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpaceMetrics {
    /// Distinct static points activated anywhere in the exploration.
    pub points: usize,
    pub sequences: u64,
    pub valid: u64,
    /// (min, lower median, max) size of valid sequences.
    pub valid_sizes: Option<(usize, usize, usize)>,
    pub truncated: bool,
}

impl SearchSpaceMetrics {
    /// Proportion of valid sequences; `None` for an empty space.
    pub fn fertility(&self) -> Option<f64> {
        (self.sequences > 0).then(|| self.valid as f64 / self.sequences as f64)
    }

    /// Computes metrics from leaves. `points` is supplied by the caller.
    pub fn from_leaves<'a>(
        points: usize,
        leaves: impl IntoIterator<Item = (usize, &'a LapsOutcome)>,
        truncated: bool,
    ) -> Self {
        let mut sequences = 0;
        let mut sizes = Vec::new();
        for (len, outcome) in leaves {
            sequences += 1;
            if outcome.is_success() {
                sizes.push(len);
            }
        }
        sizes.sort_unstable();
        let valid_sizes = (!sizes.is_empty()).then(|| {
            (
                sizes[0],
                sizes[(sizes.len() - 1) / 2],
                sizes[sizes.len() - 1],
            )
        });
        SearchSpaceMetrics {
            points,
            sequences,
            valid: sizes.len() as u64,
            valid_sizes,
            truncated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub tree: DecisionTree,
    pub metrics: SearchSpaceMetrics,
}

impl Exploration {
    pub fn valid_sequences(&self) -> BTreeSet<DecisionSequence> {
        self.tree
            .leaves()
            .into_iter()
            .filter(|(_, o)| o.is_success())
            .map(|(s, _)| s)
            .collect()
    }

    pub fn sequences(&self) -> BTreeSet<DecisionSequence> {
        self.tree.leaves().into_iter().map(|(s, _)| s).collect()
    }
}

struct Search<'p> {
    program: &'p Program,
    entry: &'p str,
    budget: u64,
    cap: u64,
    leaves: u64,
    truncated: bool,
    points: BTreeSet<DecisionPointId>,
    activations: BTreeMap<DecisionPointId, u64>,
}

impl Search<'_> {
    /// Expands the subtree under `prefix`, whose last activation was `point`.
    fn expand(
        &mut self,
        point: DecisionPointId,
        decisions: Vec<Decision>,
        prefix: &mut Vec<Step>,
    ) -> Result<Node, ReplayError> {
        let mut node = Node {
            point: point.clone(),
            children: Vec::with_capacity(decisions.len()),
        };
        for decision in decisions {
            if self.truncated {
                break;
            }
            prefix.push(Step {
                point: point.clone(),
                decision: decision.clone(),
            });
            let child = self.visit(prefix);
            prefix.pop();
            match child? {
                Some(child) => node.children.push(Branch { decision, child }),
                None => break,
            }
        }
        Ok(node)
    }

    /// Runs the laps under `prefix`. `None` means the cap stopped the search.
    fn visit(&mut self, prefix: &mut Vec<Step>) -> Result<Option<Child>, ReplayError> {
        let (run, pending) = replay_steps(self.program, self.entry, prefix, self.budget)?;
        self.points.extend(run.trace.activated.iter().cloned());
        match run.outcome {
            LapsOutcome::NeedsMoreDecisions(point) => {
                let decisions = pending.expect("exhausted script records the enumeration");
                Ok(Some(Child::Node(self.expand(point, decisions, prefix)?)))
            }
            outcome => {
                if self.leaves == self.cap {
                    self.truncated = true;
                    return Ok(None);
                }
                self.leaves += 1;
                for p in &run.trace.activated {
                    *self.activations.entry(p.clone()).or_default() += 1;
                }
                Ok(Some(Child::Leaf(outcome)))
            }
        }
    }
}

/// Builds the complete decision tree for `entry`, stopping after `sequence_cap` leaves.
pub fn explore_exhaustive(
    program: &Program,
    entry: &str,
    step_budget: u64,
    sequence_cap: u64,
) -> Result<Exploration, ReplayError> {
    let mut search = Search {
        program,
        entry,
        budget: step_budget,
        cap: sequence_cap,
        leaves: 0,
        truncated: false,
        points: BTreeSet::new(),
        activations: BTreeMap::new(),
    };
    let (first, pending) = replay_steps(program, entry, &[], step_budget)?;
    let tree = match first.outcome {
        LapsOutcome::NeedsMoreDecisions(point) => {
            search.points.insert(point.clone());
            let decisions = pending.expect("exhausted script records the enumeration");
            let root = search.expand(point, decisions, &mut Vec::new())?;
            DecisionTree {
                root: Some(root),
                baseline: None,
                activations: core::mem::take(&mut search.activations),
            }
        }
        outcome => DecisionTree {
            root: None,
            baseline: Some(outcome),
            activations: BTreeMap::new(),
        },
    };
    let leaves = tree.leaves();
    let metrics = SearchSpaceMetrics::from_leaves(
        search.points.len(),
        leaves.iter().map(|(s, o)| (s.len(), *o)),
        search.truncated,
    );
    drop(leaves);
    Ok(Exploration { tree, metrics })
}
