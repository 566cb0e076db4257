//! Hand-traced behaviour of the two-failure session program.

use banditlab_core::explorer::{explore_exhaustive, replay};
use banditlab_core::minilang::{
    execute, parse, DecisionPointId, DecisionProvider, DecisionRequest, LapsOutcome, Origin,
    Provision, ScopeEntry, Unrepaired, Value, DEFAULT_STEP_BUDGET,
};
use banditlab_core::patchmodel::{DecisionSequence, Strategy};

const SESSION: &str = include_str!("../../lab/fixtures/session.mls");

fn npe1() -> DecisionPointId {
    "getLastConnectionDate/1/0".parse().unwrap()
}

fn npe2() -> DecisionPointId {
    "render/0/1".parse().unwrap()
}

fn run(script: &str) -> (LapsOutcome, Vec<DecisionPointId>) {
    let p = parse(SESSION).unwrap();
    let seq: DecisionSequence = script.parse().unwrap();
    let r = replay(&p, "main", &seq, DEFAULT_STEP_BUDGET).unwrap();
    (r.outcome, r.trace.activated)
}

#[test]
fn parses_classes_and_functions() {
    let p = parse(SESSION).unwrap();
    for c in ["Date", "Session", "Html"] {
        assert!(p.class(c).is_some(), "{c}");
    }
    for f in ["getLastConnectionDate", "render", "main"] {
        assert!(p.function(f).is_some(), "{f}");
    }
}

#[test]
fn unrepaired_run_stops_at_first_point() {
    let p = parse(SESSION).unwrap();
    let e = execute(&p, "main", Unrepaired, DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(e.outcome, LapsOutcome::UnrepairedNull(npe1()));
    assert_eq!(e.trace.activated, vec![npe1()]);
}

#[test]
fn return_null_then_skip_fails_the_oracle() {
    let (outcome, activated) = run("ReturnNull@getLastConnectionDate/1/0;SkipLine@render/0/1");
    assert!(matches!(outcome, LapsOutcome::OracleFailed(ref l) if l.function == "main"));
    assert_eq!(activated, vec![npe1(), npe2()]);
}

#[test]
fn fresh_session_cascades_into_second_failure() {
    let (outcome, activated) = run("ReplaceNew:Session@getLastConnectionDate/1/0");
    assert_eq!(outcome, LapsOutcome::NeedsMoreDecisions(npe2()));
    assert_eq!(activated, vec![npe1(), npe2()]);
}

#[test]
fn covering_the_cascade_succeeds() {
    let (outcome, _) =
        run("ReplaceNew:Session@getLastConnectionDate/1/0;ReplaceNew:Date@render/0/1");
    assert_eq!(outcome, LapsOutcome::Success);
    let (outcome, activated) = run("ReturnNew:Date@getLastConnectionDate/1/0");
    assert_eq!(outcome, LapsOutcome::Success);
    assert_eq!(activated, vec![npe1()]);
}

#[test]
fn trailing_script_steps_are_reported_unused() {
    let p = parse(SESSION).unwrap();
    let seq: DecisionSequence = "ReturnNew:Date@getLastConnectionDate/1/0;SkipLine@render/0/1"
        .parse()
        .unwrap();
    let r = replay(&p, "main", &seq, DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(r.outcome, LapsOutcome::Success);
    assert_eq!(r.unused.len(), 1);
    assert_eq!(r.unused[0].point, npe2());
}

struct Spy(Vec<(DecisionPointId, Vec<ScopeEntry>, Vec<Strategy>)>);

impl DecisionProvider for Spy {
    fn provide(&mut self, r: &DecisionRequest<'_>) -> Provision {
        self.0.push((
            r.point.clone(),
            r.scope.to_vec(),
            r.decisions.iter().map(|d| d.strategy.clone()).collect(),
        ));
        Provision::Decline
    }
}

#[test]
fn first_point_sees_one_null_local() {
    let p = parse(SESSION).unwrap();
    let mut spy = Spy(Vec::new());
    execute(&p, "main", &mut spy, DEFAULT_STEP_BUDGET).unwrap();
    let (point, scope, strategies) = &spy.0[0];
    assert_eq!(*point, npe1());
    assert_eq!(scope.len(), 1);
    assert_eq!(scope[0].name, "session");
    assert_eq!(scope[0].value, Value::Null);
    assert_eq!(scope[0].origin, Origin::Local);
    let shown: Vec<String> = strategies.iter().map(|s| s.to_string()).collect();
    assert_eq!(
        shown,
        [
            "ReplaceNew:Session",
            "SkipLine",
            "ReturnNull",
            "ReturnNew:Date"
        ]
    );
}

#[test]
fn exhaustive_space_matches_hand_count() {
    let p = parse(SESSION).unwrap();
    let x = explore_exhaustive(&p, "main", DEFAULT_STEP_BUDGET, 1000).unwrap();
    let m = &x.metrics;
    assert_eq!(m.points, 2);
    assert_eq!(m.sequences, 10);
    assert_eq!(m.valid, 4);
    assert_eq!(m.valid_sizes, Some((1, 2, 2)));
    assert!(!m.truncated);
    let valid: Vec<String> = x.valid_sequences().iter().map(|s| s.to_string()).collect();
    assert!(valid.contains(&"ReturnNew:Date@getLastConnectionDate/1/0".to_string()));
    for first in ["ReplaceNew:Session", "SkipLine", "ReturnNull"] {
        let s = format!("{first}@getLastConnectionDate/1/0;ReplaceNew:Date@render/0/1");
        assert!(valid.contains(&s), "{s}");
    }
}
