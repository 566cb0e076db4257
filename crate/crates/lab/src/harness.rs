//! Runs repair scenarios over a grid of exploitation coefficients and seeds.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use banditlab_core::engine::{ConfigError, Engine, EngineConfig, Portfolio};
use banditlab_core::explorer::DEFAULT_SEQUENCE_CAP;
use banditlab_core::minilang::{parse_named, ExecError, ParseError, Program, DEFAULT_STEP_BUDGET};

/// Environment variable bounding the number of worker threads.
pub const WORKERS_VAR: &str = "BANDITLAB_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{fixture}: cannot read program: {source}")]
    Io {
        fixture: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{fixture}: {source}")]
    Parse {
        fixture: String,
        #[source]
        source: ParseError,
    },
    #[error("{fixture}: {source}")]
    Exec {
        fixture: String,
        #[source]
        source: ExecError,
    },
    #[error("{fixture}: {source}")]
    Config {
        fixture: String,
        #[source]
        source: ConfigError,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn default_entry() -> String {
    "main".into()
}

fn default_laps() -> u64 {
    200
}

/// 0.0 to 1.0 in steps of 0.1.
pub fn default_zetas() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

pub fn default_seeds() -> Vec<u64> {
    (1..=31).collect()
}

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

fn default_cap() -> u64 {
    DEFAULT_SEQUENCE_CAP
}

/// One program swept over a grid of coefficients and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub program: PathBuf,
    /// Row label; defaults to the program's file stem.
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default = "default_entry")]
    pub entry: String,
    #[serde(default = "default_laps")]
    pub laps: u64,
    #[serde(default = "default_zetas")]
    pub zetas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    #[serde(default = "default_cap")]
    pub sequence_cap: u64,
}

impl ScenarioConfig {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ScenarioConfig {
            program: program.into(),
            fixture: None,
            entry: default_entry(),
            laps: default_laps(),
            zetas: default_zetas(),
            seeds: default_seeds(),
            step_budget: default_budget(),
            sequence_cap: default_cap(),
        }
    }

    pub fn fixture_id(&self) -> String {
        self.fixture.clone().unwrap_or_else(|| {
            self.program
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.program.display().to_string())
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Invalid(format!("{}: {m}", self.fixture_id())));
        if self.laps == 0 {
            return fail("laps must be at least 1");
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty");
        }
        if self.zetas.is_empty() {
            return fail("zeta list is empty");
        }
        if let Some(z) = self.zetas.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return fail(&format!("zeta {z} outside [0, 1]"));
        }
        if self.step_budget == 0 || self.sequence_cap == 0 {
            return fail("step budget and sequence cap must be positive");
        }
        Ok(())
    }
}

/// A grid file holds either one scenario or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridFile {
    One(ScenarioConfig),
    Many(Vec<ScenarioConfig>),
}

/// Reads a grid file. Relative program paths are resolved against the file's directory.
pub fn load_grid(path: &Path) -> Result<Vec<ScenarioConfig>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        fixture: path.display().to_string(),
        source,
    })?;
    let grid: GridFile = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))?;
    let mut configs = match grid {
        GridFile::One(c) => vec![c],
        GridFile::Many(cs) => cs,
    };
    let base = path.parent().unwrap_or(Path::new("."));
    for c in &mut configs {
        if c.program.is_relative() {
            c.program = base.join(&c.program);
        }
        c.validate()?;
    }
    Ok(configs)
}

/// Reads and parses a program file, naming the fixture in any error.
pub fn load_program(path: &Path, fixture: &str) -> Result<Program, HarnessError> {
    let source = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        fixture: fixture.to_string(),
        source,
    })?;
    parse_named(&source, fixture).map_err(|source| HarnessError::Parse {
        fixture: fixture.to_string(),
        source,
    })
}

/// One (fixture, zeta, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub fixture: String,
    pub zeta: f64,
    pub seed: u64,
    /// Distinct decision points activated across all laps.
    pub points: usize,
    /// Distinct decision sequences taken.
    pub explored: usize,
    /// Runtime patches in the final portfolio.
    pub valid: usize,
    pub handled_fraction: f64,
    /// Laps in which the last new distinct sequence appeared; 0 when none did.
    pub laps_to_max_exploration: u64,
}

/// Per-laps progress of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub fixture: String,
    pub zeta: f64,
    pub seed: u64,
    /// Cumulative distinct sequences after each laps.
    pub explored: Vec<u64>,
    /// Cumulative successful laps after each laps.
    pub successes: Vec<u64>,
    /// Laps after which every decision at every known point had been used.
    pub exhausted_at: Option<u64>,
}

impl ConvergenceTrace {
    /// Cumulative handled fraction after laps `i` (0-based).
    pub fn handled_fraction(&self, i: usize) -> f64 {
        self.successes[i] as f64 / (i + 1) as f64
    }

    /// Success rate over laps `from+1..=to` (1-based, inclusive end).
    pub fn window_rate(&self, from: u64, to: u64) -> Option<f64> {
        if to <= from || to as usize > self.successes.len() {
            return None;
        }
        let before = if from == 0 {
            0
        } else {
            self.successes[from as usize - 1]
        };
        let wins = self.successes[to as usize - 1] - before;
        Some(wins as f64 / (to - from) as f64)
    }
}

/// Everything one cell produces.
#[derive(Debug, Clone)]
pub struct Cell {
    pub row: ReportRow,
    pub trace: ConvergenceTrace,
    pub portfolio: Portfolio,
}

/// Runs `laps` laps of a fresh engine.
pub fn run_cell(
    program: &Program,
    fixture: &str,
    entry: &str,
    laps: u64,
    config: EngineConfig,
) -> Result<Cell, HarnessError> {
    let mut engine = Engine::new(program, entry, config);
    let mut points = BTreeSet::new();
    let mut successes = 0;
    let mut last_new = 0;
    let mut exhausted_at = None;
    let mut explored_t = Vec::with_capacity(laps as usize);
    let mut successes_t = Vec::with_capacity(laps as usize);
    for _ in 0..laps {
        let report = engine.run_laps().map_err(|source| HarnessError::Exec {
            fixture: fixture.to_string(),
            source,
        })?;
        points.extend(report.sequence.steps().iter().map(|s| s.point.clone()));
        if report.outcome.is_success() {
            successes += 1;
        }
        if report.new_sequence {
            last_new = report.laps;
        }
        if exhausted_at.is_none()
            && !points.is_empty()
            && engine.portfolio().exploration_exhausted()
        {
            exhausted_at = Some(report.laps);
        }
        explored_t.push(engine.explored().len() as u64);
        successes_t.push(successes);
    }
    let portfolio = engine.into_portfolio();
    let row = ReportRow {
        fixture: fixture.to_string(),
        zeta: config.zeta,
        seed: config.seed,
        points: points.len(),
        explored: *explored_t.last().unwrap_or(&0) as usize,
        valid: portfolio.patch_count(),
        handled_fraction: successes as f64 / laps as f64,
        laps_to_max_exploration: last_new,
    };
    let trace = ConvergenceTrace {
        fixture: fixture.to_string(),
        zeta: config.zeta,
        seed: config.seed,
        explored: explored_t,
        successes: successes_t,
        exhausted_at,
    };
    Ok(Cell {
        row,
        trace,
        portfolio,
    })
}

/// Rows, traces and final portfolios of a scenario, sorted by (fixture, zeta, seed).
#[derive(Debug, Clone, Default)]
pub struct ScenarioResult {
    pub rows: Vec<ReportRow>,
    pub traces: Vec<ConvergenceTrace>,
    pub portfolios: Vec<Portfolio>,
}

impl ScenarioResult {
    fn extend(&mut self, cells: Vec<Cell>) {
        for c in cells {
            self.rows.push(c.row);
            self.traces.push(c.trace);
            self.portfolios.push(c.portfolio);
        }
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| row_order(&self.rows[a], &self.rows[b]));
        self.rows = order.iter().map(|&i| self.rows[i].clone()).collect();
        self.traces = order.iter().map(|&i| self.traces[i].clone()).collect();
        self.portfolios = order.iter().map(|&i| self.portfolios[i].clone()).collect();
    }
}

pub fn row_order(a: &ReportRow, b: &ReportRow) -> std::cmp::Ordering {
    a.fixture
        .cmp(&b.fixture)
        .then(a.zeta.total_cmp(&b.zeta))
        .then(a.seed.cmp(&b.seed))
}

/// Worker count from `BANDITLAB_WORKERS`, or machine parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (zeta, seed) cell of an already parsed program.
pub fn run_program(
    program: &Program,
    config: &ScenarioConfig,
) -> Result<ScenarioResult, HarnessError> {
    config.validate()?;
    let fixture = config.fixture_id();
    let cells: Vec<(f64, u64)> = config
        .zetas
        .iter()
        .flat_map(|&z| config.seeds.iter().map(move |&s| (z, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()?;
    let cells = pool.install(|| {
        cells
            .par_iter()
            .map(|&(zeta, seed)| {
                let ec = EngineConfig::with_budget(zeta, seed, config.step_budget).map_err(
                    |source| HarnessError::Config {
                        fixture: fixture.clone(),
                        source,
                    },
                )?;
                run_cell(program, &fixture, &config.entry, config.laps, ec)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut result = ScenarioResult::default();
    result.extend(cells);
    result.sort();
    Ok(result)
}

/// Loads the scenario's program and runs its grid.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    let program = load_program(&config.program, &config.fixture_id())?;
    run_program(&program, config)
}

/// Runs several scenarios and merges their sorted results.
pub fn run_grid(configs: &[ScenarioConfig]) -> Result<ScenarioResult, HarnessError> {
    let mut all = ScenarioResult::default();
    for c in configs {
        let r = run_scenario(c)?;
        all.rows.extend(r.rows);
        all.traces.extend(r.traces);
        all.portfolios.extend(r.portfolios);
    }
    all.sort();
    Ok(all)
}

/// One scatter point: x = laps to max exploration, y = handled fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub laps_to_max_exploration: u64,
    pub handled_fraction: f64,
    pub zeta: f64,
}

pub fn pareto_points(rows: &[ReportRow]) -> Vec<ParetoPoint> {
    rows.iter()
        .map(|r| ParetoPoint {
            laps_to_max_exploration: r.laps_to_max_exploration,
            handled_fraction: r.handled_fraction,
            zeta: r.zeta,
        })
        .collect()
}

/// Lower median; `None` when empty.
pub fn median<T: Copy + PartialOrd>(values: &[T]) -> Option<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable values"));
    v.get(v.len().checked_sub(1)? / 2).copied()
}

/// Spearman rank correlation with average ranks for ties; `None` when undefined.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}
