//! Acceptance criteria, one result line each.
//!
//! Tolerances are fixed here:
//! - exhaustive oracle equivalence: exact, at most 10 s of exploration
//! - full exploitation: exact
//! - trade-off medians: ties allowed, no slack otherwise
//! - stationary convergence: |rate - (zeta + (1 - zeta) f)| <= 0.05, 5000 laps, at most 30 s
//! - pure exploration completeness: exact, laps = 10 x |space|
//! - patch soundness: exact
//! - determinism: byte-identical CSV, at most 300 s per grid
//! - structural analogs: exact metrics
//! - scatter data: 310 points, Spearman > 0, no x below the first valid index

#[path = "support/oracle.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use banditlab::cli::run_captured;
use banditlab::core::engine::{Engine, EngineConfig};
use banditlab::core::explorer::{explore_exhaustive, replay, Exploration, DEFAULT_SEQUENCE_CAP};
use banditlab::core::minilang::{parse, Program, DEFAULT_STEP_BUDGET};
use banditlab::corpus::{self, ManifestEntry, FIXTURES};
use banditlab::harness::{self, median, spearman, ScenarioConfig};
use banditlab::report::{self, portfolio_json, PortfolioJson};

const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(10);
const CONVERGENCE_LIMIT: Duration = Duration::from_secs(30);
const GRID_LIMIT: Duration = Duration::from_secs(300);
const CONVERGENCE_TOLERANCE: f64 = 0.05;
const CONVERGENCE_LAPS: u64 = 5000;
const ORACLE_MAX_SEQUENCES: u64 = 1000;
const COMPLETENESS_MAX_SPACE: u64 = 100;

type Verdict = Result<String, String>;

struct Corpus {
    fixtures: Vec<(&'static str, Program, ManifestEntry)>,
}

impl Corpus {
    fn load() -> Self {
        let manifest = corpus::manifest();
        let fixtures = FIXTURES
            .iter()
            .map(|f| {
                let m = manifest
                    .iter()
                    .find(|m| m.fixture == f.name)
                    .unwrap_or_else(|| panic!("{} missing from manifest", f.name))
                    .clone();
                (f.name, parse(f.source).expect("corpus parses"), m)
            })
            .collect();
        Corpus { fixtures }
    }

    fn fertile(&self) -> impl Iterator<Item = &(&'static str, Program, ManifestEntry)> {
        self.fixtures.iter().filter(|(_, _, m)| m.valid > 0)
    }

    fn get(&self, name: &str) -> &(&'static str, Program, ManifestEntry) {
        self.fixtures
            .iter()
            .find(|f| f.0 == name)
            .expect("fixture exists")
    }
}

fn explore(p: &Program) -> Exploration {
    explore_exhaustive(p, "main", DEFAULT_STEP_BUDGET, DEFAULT_SEQUENCE_CAP).expect("explores")
}

fn strings(set: &BTreeSet<banditlab::core::patchmodel::DecisionSequence>) -> BTreeSet<String> {
    set.iter().map(|s| s.to_string()).collect()
}

fn exhaustive_oracle_equivalence(c: &Corpus) -> Verdict {
    let mut elapsed = Duration::ZERO;
    let mut checked = 0;
    for (name, p, m) in &c.fixtures {
        if m.sequences > ORACLE_MAX_SEQUENCES {
            continue;
        }
        let start = Instant::now();
        let x = explore(p);
        elapsed += start.elapsed();
        let paths = oracle::enumerate(
            p,
            "main",
            DEFAULT_STEP_BUDGET,
            ORACLE_MAX_SEQUENCES as usize,
        )
        .ok_or_else(|| format!("{name}: oracle found more than {ORACLE_MAX_SEQUENCES}"))?;
        let o = oracle::summarize(&paths);
        if strings(&x.sequences()) != o.all {
            return Err(format!("{name}: sequence sets differ"));
        }
        if strings(&x.valid_sequences()) != o.valid {
            return Err(format!("{name}: valid sets differ"));
        }
        if x.metrics.valid_sizes != o.sizes || x.metrics.truncated {
            return Err(format!(
                "{name}: sizes {:?} vs {:?}",
                x.metrics.valid_sizes, o.sizes
            ));
        }
        let pinned = (
            m.points,
            m.sequences,
            m.valid,
            m.valid_sizes.map(|[a, b, c]| (a, b, c)),
        );
        let got = (
            x.metrics.points,
            x.metrics.sequences,
            x.metrics.valid,
            x.metrics.valid_sizes,
        );
        if pinned != got {
            return Err(format!("{name}: manifest {pinned:?} vs explorer {got:?}"));
        }
        checked += 1;
    }
    if elapsed > EXHAUSTIVE_LIMIT {
        return Err(format!(
            "exploration took {elapsed:.2?} > {EXHAUSTIVE_LIMIT:?}"
        ));
    }
    Ok(format!(
        "{checked} fixtures exact, exploration {elapsed:.2?}"
    ))
}

fn full_exploitation(c: &Corpus) -> Verdict {
    let mut cells = 0;
    for (name, p, _) in c.fertile() {
        for seed in 1..=31 {
            let cell =
                harness::run_cell(p, name, "main", 200, EngineConfig::new(1.0, seed).unwrap())
                    .map_err(|e| e.to_string())?;
            let fps: Vec<_> = cell.portfolio.failure_points().collect();
            if fps.is_empty() || fps.iter().any(|(_, ps)| ps.len() != 1) {
                return Err(format!(
                    "{name} seed {seed}: patches per failure point {:?}",
                    fps.iter().map(|(_, ps)| ps.len()).collect::<Vec<_>>()
                ));
            }
            let d = fps[0].1[0].discovery_laps;
            let after = cell.trace.successes[199] - cell.trace.successes[d as usize - 1];
            if after != 200 - d {
                return Err(format!(
                    "{name} seed {seed}: {after} of {} laps after discovery handled",
                    200 - d
                ));
            }
            cells += 1;
        }
    }
    Ok(format!(
        "{cells} runs: one patch, every laps after discovery handled"
    ))
}

fn tradeoff_monotonicity(c: &Corpus) -> Verdict {
    let zetas = [0.0, 0.2, 0.8, 1.0];
    let mut summary = Vec::new();
    for (name, p, _) in c.fertile() {
        let mut cfg = ScenarioConfig::new(format!("{name}.mls"));
        cfg.zetas = zetas.to_vec();
        let rows = harness::run_program(p, &cfg)
            .map_err(|e| e.to_string())?
            .rows;
        let mut handled = Vec::new();
        let mut explored = Vec::new();
        for z in zetas {
            let at: Vec<_> = rows.iter().filter(|r| r.zeta == z).collect();
            handled
                .push(median(&at.iter().map(|r| r.handled_fraction).collect::<Vec<_>>()).unwrap());
            explored.push(median(&at.iter().map(|r| r.explored).collect::<Vec<_>>()).unwrap());
        }
        if handled.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("{name}: handled medians {handled:?}"));
        }
        if explored.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("{name}: explored medians {explored:?}"));
        }
        summary.push(format!("{name} {:.2}->{:.2}", handled[0], handled[3]));
    }
    Ok(summary.join(", "))
}

fn stationary_convergence(c: &Corpus) -> Verdict {
    let (name, p, m) = c.get("half");
    let f = m.valid as f64 / m.sequences as f64;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for zeta in [0.2, 0.5, 0.8] {
        for seed in 1..=31 {
            let cell = harness::run_cell(
                p,
                name,
                "main",
                CONVERGENCE_LAPS,
                EngineConfig::new(zeta, seed).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let from = cell
                .trace
                .exhausted_at
                .ok_or("exploration never exhausted")?;
            let rate = cell
                .trace
                .window_rate(from, CONVERGENCE_LAPS)
                .ok_or("empty window")?;
            let expected = zeta + (1.0 - zeta) * f;
            let dev = (rate - expected).abs();
            worst = worst.max(dev);
            if dev > CONVERGENCE_TOLERANCE {
                return Err(format!(
                    "zeta {zeta} seed {seed}: {rate:.4} vs {expected:.4}"
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > CONVERGENCE_LIMIT {
        return Err(format!("took {elapsed:.2?}"));
    }
    Ok(format!(
        "f = {f}, 93 runs, worst deviation {:.2} pp, {elapsed:.2?}",
        worst * 100.0
    ))
}

fn exploration_completeness(c: &Corpus) -> Verdict {
    let mut runs = 0;
    for (name, p, m) in &c.fixtures {
        if m.sequences == 0 || m.sequences > COMPLETENESS_MAX_SPACE {
            continue;
        }
        let x = explore(p);
        let valid = strings(&x.valid_sequences());
        for seed in 1..=31 {
            let mut e = Engine::new(p, "main", EngineConfig::new(0.0, seed).unwrap());
            for _ in 0..10 * m.sequences {
                e.run_laps().map_err(|e| e.to_string())?;
            }
            let found: BTreeSet<String> = e
                .portfolio()
                .failure_points()
                .flat_map(|(_, ps)| ps.iter().map(|p| p.sequence.to_string()))
                .collect();
            if found != valid {
                return Err(format!(
                    "{name} seed {seed}: {} of {} valid found",
                    found.len(),
                    valid.len()
                ));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs found every valid sequence"))
}

fn patch_soundness(c: &Corpus, portfolios: &[(String, Vec<PortfolioJson>)]) -> Verdict {
    let mut replayed = 0;
    for (name, json) in portfolios {
        let (_, p, _) = c.get(name);
        let text = serde_json::to_string(json).map_err(|e| e.to_string())?;
        let back: Vec<PortfolioJson> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for entry in &back {
            for patch in &entry.patches {
                let patch = patch.to_patch().map_err(|e| e.to_string())?;
                let r = replay(p, "main", &patch.sequence, DEFAULT_STEP_BUDGET)
                    .map_err(|e| format!("{name}: {e}"))?;
                if !r.outcome.is_success() || !r.unused.is_empty() {
                    return Err(format!(
                        "{name}: {} replays to {}",
                        patch.sequence, r.outcome
                    ));
                }
                replayed += 1;
            }
        }
    }
    Ok(format!("{replayed} stored patches replay to success"))
}

type Portfolios = Vec<(String, Vec<PortfolioJson>)>;

fn determinism_and_grid(dir: &std::path::Path) -> Result<(String, Portfolios), String> {
    let grid = corpus::fixture_dir().join("grid.json");
    let start = Instant::now();
    let configs = harness::load_grid(&grid).map_err(|e| e.to_string())?;
    let first = harness::run_grid(&configs).map_err(|e| e.to_string())?;
    let first_time = start.elapsed();
    let first_csv = report::report_to_string(&first.rows);

    let out = dir.join("report.csv");
    let start = Instant::now();
    let (code, stdout, stderr) = run_captured([
        "banditlab".as_ref(),
        "grid".as_ref(),
        grid.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
    ]);
    let second_time = start.elapsed();
    if code != 0 {
        return Err(format!("grid exited {code}: {stderr}{stdout}"));
    }
    let second_csv = fs::read_to_string(&out).map_err(|e| e.to_string())?;
    if first_csv != second_csv {
        return Err("reports differ".into());
    }
    let slowest = first_time.max(second_time);
    if slowest > GRID_LIMIT {
        return Err(format!("grid took {slowest:.2?}"));
    }
    let portfolios = first
        .rows
        .iter()
        .zip(&first.portfolios)
        .map(|(r, p)| (r.fixture.clone(), portfolio_json(p)))
        .collect();
    Ok((
        format!(
            "{} rows identical, slowest grid {slowest:.2?}",
            first.rows.len()
        ),
        portfolios,
    ))
}

fn structural_analogs(c: &Corpus) -> Verdict {
    let mut found = [None::<&str>; 4];
    for (name, p, m) in &c.fixtures {
        if m.sequences > ORACLE_MAX_SEQUENCES {
            continue;
        }
        let x = explore(p);
        let sizes: BTreeSet<usize> = x.valid_sequences().iter().map(|s| s.len()).collect();
        let mm = &x.metrics;
        if mm.points == 1 && mm.sequences == 5 && mm.valid == 5 {
            found[0].get_or_insert(name);
        }
        if mm.valid > 0 && sizes == BTreeSet::from([2]) {
            found[1].get_or_insert(name);
        }
        if mm.sequences > 0 && mm.valid == 0 {
            found[2].get_or_insert(name);
        }
        if sizes.len() >= 3 {
            found[3].get_or_insert(name);
        }
    }
    let labels = [
        "all-valid unary 5/5",
        "mandatory size 2",
        "zero fertility",
        "three sizes",
    ];
    let mut parts = Vec::new();
    for (label, f) in labels.iter().zip(found) {
        match f {
            Some(f) => parts.push(format!("{label}: {f}")),
            None => return Err(format!("no fixture for {label}")),
        }
    }
    if FIXTURES.len() < 8 {
        return Err(format!("corpus has {} fixtures", FIXTURES.len()));
    }
    Ok(parts.join(", "))
}

fn scatter_data(c: &Corpus, dir: &std::path::Path) -> Verdict {
    let (name, p, _) = c.get("needle");
    let x = explore(p);
    let first_valid = x
        .tree
        .leaves()
        .iter()
        .position(|(_, o)| o.is_success())
        .ok_or("no valid sequence")? as u64
        + 1;
    let config = dir.join("needle.json");
    let zetas: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
    let program = corpus::fixture_dir().join(format!("{name}.mls"));
    fs::write(
        &config,
        serde_json::json!({ "program": program, "zetas": zetas }).to_string(),
    )
    .map_err(|e| e.to_string())?;
    let report = dir.join("needle.csv");
    let scatter = dir.join("scatter.csv");
    let (code, _, err) = run_captured([
        "banditlab".as_ref(),
        "grid".as_ref(),
        config.as_os_str(),
        "--out".as_ref(),
        report.as_os_str(),
    ]);
    if code != 0 {
        return Err(format!("grid exited {code}: {err}"));
    }
    let (code, _, err) = run_captured([
        "banditlab".as_ref(),
        "pareto".as_ref(),
        report.as_os_str(),
        "--fixture".as_ref(),
        name.as_ref(),
        "--out".as_ref(),
        scatter.as_os_str(),
    ]);
    if code != 0 {
        return Err(format!("pareto exited {code}: {err}"));
    }
    let mut r = csv::Reader::from_path(&scatter).map_err(|e| e.to_string())?;
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    let mut hs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        xs.push(rec[0].parse::<u64>().map_err(|e| e.to_string())?);
        hs.push(rec[1].parse::<f64>().map_err(|e| e.to_string())?);
        zs.push(rec[2].parse::<f64>().map_err(|e| e.to_string())?);
    }
    if xs.len() != 310 {
        return Err(format!("{} points", xs.len()));
    }
    let rho = spearman(&zs, &hs).ok_or("correlation undefined")?;
    if rho <= 0.0 {
        return Err(format!("spearman {rho:.3}"));
    }
    let min_x = *xs.iter().min().unwrap();
    if min_x < first_valid {
        return Err(format!(
            "a point has x = {min_x} < first valid index {first_valid}"
        ));
    }
    Ok(format!(
        "310 points, spearman {rho:.3}, min x {min_x} >= first valid index {first_valid}"
    ))
}

fn main() -> ExitCode {
    let corpus = Corpus::load();
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n: u32, label: &'static str, v: Verdict| {
        let line = match &v {
            Ok(msg) => format!("criterion {n} {label}: PASS ({msg})"),
            Err(msg) => format!("criterion {n} {label}: FAIL ({msg})"),
        };
        println!("{line}");
        results.push((n, label, v));
    };

    record(
        1,
        "exhaustive-oracle equivalence",
        exhaustive_oracle_equivalence(&corpus),
    );
    record(2, "full exploitation", full_exploitation(&corpus));
    record(3, "trade-off monotonicity", tradeoff_monotonicity(&corpus));
    record(4, "stationary convergence", stationary_convergence(&corpus));
    record(
        5,
        "pure-exploration completeness",
        exploration_completeness(&corpus),
    );
    let grid = determinism_and_grid(dir.path());
    match &grid {
        Ok((_, portfolios)) => record(6, "patch soundness", patch_soundness(&corpus, portfolios)),
        Err(e) => record(6, "patch soundness", Err(format!("grid failed: {e}"))),
    }
    record(7, "determinism", grid.map(|(msg, _)| msg));
    record(8, "structural analogs", structural_analogs(&corpus));
    record(9, "pareto data", scatter_data(&corpus, dir.path()));

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
