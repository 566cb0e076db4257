use std::collections::BTreeSet;

use banditlab::core::engine::{Engine, EngineConfig};
use banditlab::core::explorer::explore_exhaustive;
use banditlab::core::minilang::{execute, parse, LapsOutcome, Program, Unrepaired};
use banditlab::corpus::{fixture_dir, manifest, FIXTURES};
use banditlab::harness::{run_cell, run_program, ScenarioConfig};
use banditlab::report::{portfolio_json, read_report, report_to_string, PortfolioJson, TreeJson};

const BUDGET: u64 = 1_000_000;

fn program(name: &str) -> Program {
    parse(banditlab::corpus::fixture(name).unwrap().source).unwrap()
}

fn config(zeta: f64, seed: u64) -> EngineConfig {
    EngineConfig::new(zeta, seed).unwrap()
}

#[test]
fn every_fixture_fails_at_a_known_point_or_succeeds() {
    for f in FIXTURES {
        let p = parse(f.source).unwrap();
        let e = execute(&p, "main", Unrepaired, BUDGET).unwrap();
        match e.outcome {
            LapsOutcome::UnrepairedNull(id) => {
                assert!(p.decision_points().contains(&id), "{}: {id}", f.name)
            }
            LapsOutcome::Success => assert_eq!(f.name, "nonull"),
            other => panic!("{}: {other:?}", f.name),
        }
    }
}

#[test]
fn fixture_files_match_the_embedded_corpus() {
    for f in FIXTURES {
        let on_disk =
            std::fs::read_to_string(fixture_dir().join(format!("{}.mls", f.name))).unwrap();
        assert_eq!(on_disk, f.source);
    }
}

#[test]
fn pure_exploration_visits_the_whole_space() {
    for entry in manifest()
        .iter()
        .filter(|m| !m.truncated && m.sequences <= 100 && m.sequences > 0)
    {
        let p = program(&entry.fixture);
        let x = explore_exhaustive(&p, "main", BUDGET, 1000).unwrap();
        let laps = 10 * entry.sequences;
        for seed in 1..=31 {
            let cell = run_cell(&p, &entry.fixture, "main", laps, config(0.0, seed)).unwrap();
            assert_eq!(
                cell.row.explored as u64, entry.sequences,
                "{} seed {seed}",
                entry.fixture
            );
            assert_eq!(
                cell.row.valid as u64, entry.valid,
                "{} seed {seed}",
                entry.fixture
            );
            assert_eq!(cell.row.points, entry.points);
            let stored: BTreeSet<_> = cell
                .portfolio
                .failure_points()
                .flat_map(|(_, ps)| ps.iter().map(|p| p.sequence.clone()))
                .collect();
            assert_eq!(stored, x.valid_sequences());
        }
    }
}

#[test]
fn explored_counts_never_exceed_the_space() {
    for entry in manifest().iter().filter(|m| !m.truncated) {
        let p = program(&entry.fixture);
        for (zeta, seed) in [(0.0, 3), (0.3, 5), (0.7, 8), (1.0, 13)] {
            let cell = run_cell(&p, &entry.fixture, "main", 150, config(zeta, seed)).unwrap();
            assert!(
                cell.row.explored as u64 <= entry.sequences,
                "{}",
                entry.fixture
            );
            assert!(cell.row.valid as u64 <= entry.valid, "{}", entry.fixture);
            assert!(cell.row.points <= entry.points, "{}", entry.fixture);
            assert!((0.0..=1.0).contains(&cell.row.handled_fraction));
            assert!(cell.row.laps_to_max_exploration <= 150);
        }
    }
}

#[test]
fn same_configuration_same_portfolio() {
    let p = program("disparate");
    let run = || {
        let mut e = Engine::new(&p, "main", config(0.4, 77));
        let reports: Vec<_> = (0..120).map(|_| e.run_laps().unwrap()).collect();
        (reports, portfolio_json(e.portfolio()))
    };
    assert_eq!(run(), run());
}

#[test]
fn default_grid_has_341_rows() {
    let p = program("session");
    let c = ScenarioConfig::new(fixture_dir().join("session.mls"));
    let r = run_program(&p, &c).unwrap();
    assert_eq!(r.rows.len(), 341);
    for row in r.rows.iter().filter(|r| r.zeta == 1.0) {
        assert_eq!(row.valid, 1, "seed {}", row.seed);
    }
    let golden = include_str!("golden/session_default.csv");
    assert_eq!(report_to_string(&r.rows), golden);
    assert_eq!(read_report(golden.as_bytes()).unwrap(), r.rows);
}

#[test]
fn needle_first_success_comes_at_laps_1_or_28() {
    let p = program("needle");
    for zeta in [0.0, 0.5, 1.0] {
        for seed in 1..=31 {
            let mut e = Engine::new(&p, "main", config(zeta, seed));
            let first = (1..=60)
                .find(|_| e.run_laps().unwrap().outcome == LapsOutcome::Success)
                .expect("needle must be found within 60 laps");
            assert!(
                first == 1 || first == 28,
                "zeta {zeta} seed {seed}: {first}"
            );
        }
    }
}

#[test]
fn tree_json_round_trips() {
    for name in ["session", "disparate", "nonull"] {
        let x = explore_exhaustive(&program(name), "main", BUDGET, 1000).unwrap();
        let json = TreeJson::from_tree(&x.tree);
        let text = serde_json::to_string(&json).unwrap();
        assert_eq!(serde_json::from_str::<TreeJson>(&text).unwrap(), json);
    }
}

#[test]
fn portfolio_json_round_trips() {
    let p = program("session");
    let mut e = Engine::new(&p, "main", config(0.5, 4));
    for _ in 0..100 {
        e.run_laps().unwrap();
    }
    let json = portfolio_json(e.portfolio());
    assert!(!json.is_empty());
    let text = serde_json::to_string_pretty(&json).unwrap();
    let back: Vec<PortfolioJson> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, json);
    for (entry, (point, patches)) in back.iter().zip(e.portfolio().failure_points()) {
        assert_eq!(entry.failure_point, point.to_string());
        let restored: Vec<_> = entry
            .patches
            .iter()
            .map(|p| p.to_patch().unwrap())
            .collect();
        assert_eq!(restored, patches);
    }
}
