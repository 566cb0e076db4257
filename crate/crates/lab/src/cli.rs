//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 fixture or input error,
//! 3 truncated exploration. The last line on stdout is always
//! `result: <subcommand> <status>`; diagnostics go to stderr.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use banditlab_core::engine::EngineConfig;
use banditlab_core::explorer::{explore_exhaustive, DEFAULT_SEQUENCE_CAP};
use banditlab_core::minilang::DEFAULT_STEP_BUDGET;

use crate::harness::{self, load_grid, load_program, pareto_points, run_cell};
use crate::report::{self, portfolio_json, TreeJson};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_TRUNCATED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "banditlab",
    version,
    about = "Runtime null-dereference repair experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a program and list its decision points.
    Check { program: PathBuf },
    /// Build the complete decision tree of a failing program.
    Exhaustive {
        program: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        /// Decision tree JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics CSV; stdout when absent.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEQUENCE_CAP, value_parser = clap::value_parser!(u64).range(1..))]
        cap: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
    },
    /// Run one repair scenario.
    Bandit {
        program: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        laps: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        /// Report row CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-laps convergence CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Final portfolio JSON.
        #[arg(long)]
        portfolio: Option<PathBuf>,
    },
    /// Run every scenario of a grid file.
    Grid {
        config: PathBuf,
        /// Report CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract scatter points of one fixture from a report.
    Pareto {
        report: PathBuf,
        #[arg(long)]
        fixture: String,
        /// Scatter CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Exhaustive { .. } => "exhaustive",
            Command::Bandit { .. } => "bandit",
            Command::Grid { .. } => "grid",
            Command::Pareto { .. } => "pareto",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn usage(message: impl ToString) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let name = args
                .get(1)
                .map(|a| a.to_string_lossy().into_owned())
                .filter(|a| !a.starts_with('-'))
                .unwrap_or_else(|| "-".into());
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                let _ = writeln!(stdout, "result: {name} usage-error");
                return EXIT_USAGE;
            }
            // --help and --version
            let _ = write!(stdout, "{e}");
            let _ = writeln!(stdout, "result: {name} ok");
            return EXIT_OK;
        }
    };
    let name = cli.command.name();
    let (code, status) = match dispatch(cli.command, stdout) {
        Ok(code) if code == EXIT_TRUNCATED => (code, "truncated"),
        Ok(code) => (code, "ok"),
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            let status = if f.code == EXIT_USAGE {
                "usage-error"
            } else {
                "error"
            };
            (f.code, status)
        }
    };
    let _ = writeln!(stdout, "result: {name} {status}");
    let _ = stdout.flush();
    code
}

fn fixture_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Writes to the file when given, otherwise to stdout.
fn emit(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<(), report::ReportError>,
) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w).map_err(Failure::input)?;
            w.flush().map_err(Failure::input)
        }
        None => f(stdout).map_err(Failure::input),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Failure::input)?;
    writeln!(w).and_then(|_| w.flush()).map_err(Failure::input)
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<u8, Failure> {
    match command {
        Command::Check { program } => {
            let p = load_program(&program, &fixture_name(&program)).map_err(Failure::input)?;
            let points = p.decision_points();
            for id in &points {
                writeln!(stdout, "{id}").map_err(Failure::input)?;
            }
            writeln!(
                stdout,
                "{} classes, {} functions, {} decision points",
                p.classes.len(),
                p.functions.len(),
                points.len()
            )
            .map_err(Failure::input)?;
            Ok(EXIT_OK)
        }
        Command::Exhaustive {
            program,
            entry,
            out,
            metrics,
            cap,
            budget,
        } => {
            let name = fixture_name(&program);
            let p = load_program(&program, &name).map_err(Failure::input)?;
            let x = explore_exhaustive(&p, &entry, budget, cap)
                .map_err(|e| Failure::input(format!("{name}: {e}")))?;
            if let Some(out) = &out {
                write_json(out, &TreeJson::from_tree(&x.tree))?;
            }
            let rows = [(name, x.metrics.clone())];
            emit(metrics.as_deref(), stdout, |w| {
                report::write_metrics(w, &rows)
            })?;
            Ok(if x.metrics.truncated {
                EXIT_TRUNCATED
            } else {
                EXIT_OK
            })
        }
        Command::Bandit {
            program,
            entry,
            zeta,
            seed,
            laps,
            budget,
            out,
            trace,
            portfolio,
        } => {
            let name = fixture_name(&program);
            let config = EngineConfig::with_budget(zeta, seed, budget).map_err(Failure::usage)?;
            let p = load_program(&program, &name).map_err(Failure::input)?;
            let cell = run_cell(&p, &name, &entry, laps, config).map_err(Failure::input)?;
            emit(out.as_deref(), stdout, |w| {
                report::write_report(w, std::slice::from_ref(&cell.row))
            })?;
            if let Some(path) = &trace {
                let mut w = create(path)?;
                report::write_trace(&mut w, &cell.trace).map_err(Failure::input)?;
                w.flush().map_err(Failure::input)?;
            }
            if let Some(path) = &portfolio {
                write_json(path, &portfolio_json(&cell.portfolio))?;
            }
            Ok(EXIT_OK)
        }
        Command::Grid { config, out } => {
            let configs = load_grid(&config).map_err(Failure::input)?;
            let result = harness::run_grid(&configs).map_err(Failure::input)?;
            emit(out.as_deref(), stdout, |w| {
                report::write_report(w, &result.rows)
            })?;
            Ok(EXIT_OK)
        }
        Command::Pareto {
            report: path,
            fixture,
            out,
        } => {
            let text = fs::read(&path)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            let rows = report::read_report(text.as_slice())
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let rows: Vec<_> = rows.into_iter().filter(|r| r.fixture == fixture).collect();
            if rows.is_empty() {
                return Err(Failure::input(format!(
                    "{}: no rows for fixture {fixture}",
                    path.display()
                )));
            }
            let points = pareto_points(&rows);
            emit(out.as_deref(), stdout, |w| {
                report::write_scatter(w, &points)
            })?;
            Ok(EXIT_OK)
        }
    }
}

/// Convenience for tests: runs the CLI and captures both streams.
pub fn run_captured<I, T>(args: I) -> (u8, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(args, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
