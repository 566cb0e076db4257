//! Epsilon-greedy runtime repair.
//!
//! Each laps runs the program once. Whenever a null dereference is about to
//! happen the engine picks a decision:
//!
//! * an unseen decision point gets a uniformly random decision;
//! * a known point draws `u` in `[0, 1)`; when `u < zeta` and the portfolio
//!   holds a patch consistent with the laps so far, that patch is replayed
//!   (exploitation), otherwise the first decision never taken at the point is
//!   tried (exploration), falling back to a uniformly random one once every
//!   decision has been used.
//!
//! Successful laps store their decision sequence as a runtime patch under
//! the laps's failure point (its first activated point).
//!
//! Random draws happen in a fixed order: one index draw for an unseen point;
//! for a known point, one `u` draw followed, only in stationary exploration,
//! by one index draw. Replaying an already chosen patch consumes nothing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::minilang::{
    execute, DecisionPointId, DecisionProvider, DecisionRequest, ExecError, LapsOutcome, Program,
    Provision, DEFAULT_STEP_BUDGET,
};
use crate::patchmodel::{Decision, DecisionSequence, RuntimePatch, Step};

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`: the top 53 bits of the next output scaled by 2^-53.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `next_u64() mod n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw from an empty range");
        (self.next_u64() % n as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub zeta: f64,
    pub seed: u64,
    pub step_budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    ZetaOutOfRange(f64),
    ZeroStepBudget,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::ZetaOutOfRange(z) => write!(f, "zeta {z} is outside [0, 1]"),
            ConfigError::ZeroStepBudget => f.write_str("step budget must be positive"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl EngineConfig {
    pub fn new(zeta: f64, seed: u64) -> Result<Self, ConfigError> {
        Self::with_budget(zeta, seed, DEFAULT_STEP_BUDGET)
    }

    pub fn with_budget(zeta: f64, seed: u64, step_budget: u64) -> Result<Self, ConfigError> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(ConfigError::ZetaOutOfRange(zeta));
        }
        if step_budget == 0 {
            return Err(ConfigError::ZeroStepBudget);
        }
        Ok(EngineConfig {
            zeta,
            seed,
            step_budget,
        })
    }
}

/// Runtime patches per failure point plus per-point exploration bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Portfolio {
    patches: BTreeMap<DecisionPointId, Vec<RuntimePatch>>,
    used: BTreeMap<DecisionPointId, BTreeSet<usize>>,
    sizes: BTreeMap<DecisionPointId, usize>,
    invalid: BTreeSet<DecisionSequence>,
}

impl Portfolio {
    pub fn new() -> Self {
        Self::default()
    }

    /// A point is known once it has been activated in some laps.
    pub fn is_known(&self, point: &DecisionPointId) -> bool {
        self.sizes.contains_key(point)
    }

    pub fn patches(&self, failure_point: &DecisionPointId) -> &[RuntimePatch] {
        self.patches
            .get(failure_point)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn failure_points(&self) -> impl Iterator<Item = (&DecisionPointId, &[RuntimePatch])> {
        self.patches.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn patch_count(&self) -> usize {
        self.patches.values().map(Vec::len).sum()
    }

    pub fn used(&self, point: &DecisionPointId) -> Option<&BTreeSet<usize>> {
        self.used.get(point)
    }

    /// Largest enumeration size observed at the point.
    pub fn enumeration_size(&self, point: &DecisionPointId) -> Option<usize> {
        self.sizes.get(point).copied()
    }

    /// Sequences that ended a laps without success.
    pub fn invalid(&self) -> &BTreeSet<DecisionSequence> {
        &self.invalid
    }

    /// True when every decision at every known point has been taken at least once.
    pub fn exploration_exhausted(&self) -> bool {
        self.sizes.iter().all(|(p, &n)| {
            self.used
                .get(p)
                .is_some_and(|u| (0..n).all(|i| u.contains(&i)))
        })
    }

    fn observe(&mut self, point: &DecisionPointId, size: usize) {
        let slot = self.sizes.entry(point.clone()).or_insert(size);
        *slot = (*slot).max(size);
    }

    fn mark_used(&mut self, point: &DecisionPointId, index: usize) {
        self.used.entry(point.clone()).or_default().insert(index);
    }

    fn record(&mut self, sequence: &DecisionSequence, success: bool, laps: u64) {
        let Some(failure_point) = sequence.first_point().cloned() else {
            return;
        };
        let entry = self.patches.entry(failure_point).or_default();
        match entry.iter_mut().find(|p| p.sequence == *sequence) {
            Some(patch) => {
                patch.applications += 1;
                if success {
                    patch.successes += 1;
                }
            }
            None if success => entry.push(RuntimePatch::discovered(sequence.clone(), laps)),
            None => {
                self.invalid.insert(sequence.clone());
            }
        }
        if entry.is_empty() {
            let key = sequence.first_point().cloned().expect("non-empty sequence");
            self.patches.remove(&key);
        }
    }
}

/// Best patch: highest success rate, then fewest decisions, then earliest discovery.
///
/// # Panics
/// Panics when `patches` is empty.
pub fn best_patch(patches: &[RuntimePatch]) -> &RuntimePatch {
    patches
        .iter()
        .min_by(|a, b| compare_patches(a, b))
        .expect("best_patch needs at least one patch")
}

// `Less` means `a` is preferred.
fn compare_patches(a: &RuntimePatch, b: &RuntimePatch) -> Ordering {
    let rate_a = a.successes as u128 * b.applications as u128;
    let rate_b = b.successes as u128 * a.applications as u128;
    rate_b
        .cmp(&rate_a)
        .then(a.size().cmp(&b.size()))
        .then(a.discovery_laps.cmp(&b.discovery_laps))
}

/// Which branch of the selection rule produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Unseen point: uniform random decision.
    Random,
    /// Known point, `u < zeta`: first step of a replayed patch.
    Exploit,
    /// Continuing the replay of the patch chosen earlier in the laps.
    Replay,
    /// Known point: lowest-index decision never taken here.
    ExploreUnused,
    /// Known point, every decision already taken: uniform random decision.
    ExploreStationary,
}

/// Per-laps selection state.
#[derive(Debug, Clone, Default)]
pub struct LapsState {
    pub failure_point: Option<DecisionPointId>,
    pub taken: Vec<Step>,
    /// Patch being replayed, if the laps is exploiting.
    pub replay: Option<DecisionSequence>,
    pub exploited: bool,
    /// A replay diverged; the rest of the laps explores.
    pub diverged: bool,
}

/// Chooses the decision for an activated point. Does not update the portfolio.
pub fn select_decision(
    point: &DecisionPointId,
    laps: &mut LapsState,
    portfolio: &Portfolio,
    enumeration: &[Decision],
    rng: &mut Rng,
    zeta: f64,
) -> (Decision, Choice) {
    assert!(!enumeration.is_empty(), "enumeration is never empty");
    let k = laps.taken.len();
    let matching = |step: Option<&Step>| {
        step.filter(|s| s.point == *point)
            .and_then(|s| enumeration.iter().find(|d| **d == s.decision))
            .cloned()
    };

    if let Some(patch) = &laps.replay {
        if let Some(d) = matching(patch.steps().get(k)) {
            return (d, Choice::Replay);
        }
        laps.replay = None;
        laps.diverged = true;
    }

    if !portfolio.is_known(point) {
        let i = rng.below(enumeration.len());
        return (enumeration[i].clone(), Choice::Random);
    }

    if !laps.diverged && rng.next_unit() < zeta {
        let failure_point = laps.failure_point.as_ref().unwrap_or(point);
        let candidates: Vec<RuntimePatch> = portfolio
            .patches(failure_point)
            .iter()
            .filter(|p| {
                p.sequence.starts_with(&laps.taken) && matching(p.sequence.steps().get(k)).is_some()
            })
            .cloned()
            .collect();
        if !candidates.is_empty() {
            let best = best_patch(&candidates);
            let d = matching(best.sequence.steps().get(k)).expect("filtered above");
            laps.replay = Some(best.sequence.clone());
            laps.exploited = true;
            return (d, Choice::Exploit);
        }
    }

    let used = portfolio.used(point);
    if let Some(d) = enumeration
        .iter()
        .find(|d| !used.is_some_and(|u| u.contains(&d.index)))
    {
        return (d.clone(), Choice::ExploreUnused);
    }
    let i = rng.below(enumeration.len());
    (enumeration[i].clone(), Choice::ExploreStationary)
}

/// Result of one laps.
#[derive(Debug, Clone, PartialEq)]
pub struct LapsReport {
    /// 1-based laps index.
    pub laps: u64,
    pub sequence: DecisionSequence,
    pub outcome: LapsOutcome,
    /// The laps started by replaying a stored patch.
    pub exploited: bool,
    /// The sequence had never been taken before.
    pub new_sequence: bool,
}

struct EngineProvider<'a> {
    portfolio: &'a mut Portfolio,
    rng: &'a mut Rng,
    laps: LapsState,
    zeta: f64,
}

impl DecisionProvider for EngineProvider<'_> {
    fn provide(&mut self, request: &DecisionRequest<'_>) -> Provision {
        let point = request.point;
        if self.laps.failure_point.is_none() {
            self.laps.failure_point = Some(point.clone());
        }
        let (decision, _) = select_decision(
            point,
            &mut self.laps,
            self.portfolio,
            request.decisions,
            self.rng,
            self.zeta,
        );
        self.portfolio.observe(point, request.decisions.len());
        self.portfolio.mark_used(point, decision.index);
        self.laps.taken.push(Step {
            point: point.clone(),
            decision: decision.clone(),
        });
        Provision::Apply(decision)
    }
}

/// One repair scenario: a program, its entry, and the engine state across laps.
#[derive(Debug, Clone)]
pub struct Engine<'p> {
    program: &'p Program,
    entry: String,
    config: EngineConfig,
    portfolio: Portfolio,
    rng: Rng,
    laps: u64,
    explored: BTreeSet<DecisionSequence>,
}

impl<'p> Engine<'p> {
    pub fn new(program: &'p Program, entry: &str, config: EngineConfig) -> Self {
        Engine {
            program,
            entry: entry.to_string(),
            rng: Rng::new(config.seed),
            config,
            portfolio: Portfolio::new(),
            laps: 0,
            explored: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }

    pub fn into_portfolio(self) -> Portfolio {
        self.portfolio
    }

    /// Distinct non-empty sequences taken so far.
    pub fn explored(&self) -> &BTreeSet<DecisionSequence> {
        &self.explored
    }

    pub fn laps_run(&self) -> u64 {
        self.laps
    }

    /// Runs one laps and updates the portfolio.
    pub fn run_laps(&mut self) -> Result<LapsReport, ExecError> {
        self.laps += 1;
        let mut provider = EngineProvider {
            portfolio: &mut self.portfolio,
            rng: &mut self.rng,
            laps: LapsState::default(),
            zeta: self.config.zeta,
        };
        let execution = execute(
            self.program,
            &self.entry,
            &mut provider,
            self.config.step_budget,
        )?;
        let exploited = provider.laps.exploited;
        let sequence = execution.trace.taken;
        let outcome = execution.outcome;
        self.portfolio
            .record(&sequence, outcome.is_success(), self.laps);
        let new_sequence = !sequence.is_empty() && self.explored.insert(sequence.clone());
        Ok(LapsReport {
            laps: self.laps,
            sequence,
            outcome,
            exploited,
            new_sequence,
        })
    }
}
