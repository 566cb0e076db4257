//! CSV and JSON formats for report rows, metrics, decision trees and portfolios.
//!
//! Reals are written with 6 decimal digits, ties rounded to even.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use banditlab_core::engine::Portfolio;
use banditlab_core::explorer::{Child, DecisionTree, Node, SearchSpaceMetrics};
use banditlab_core::patchmodel::{DecisionSequence, RuntimePatch};

use crate::harness::{ConvergenceTrace, ParetoPoint, ReportRow};

pub const REPORT_HEADER: [&str; 8] = [
    "fixture",
    "zeta",
    "seed",
    "points",
    "explored",
    "valid",
    "handled_fraction",
    "laps_to_max_exploration",
];

pub const METRICS_HEADER: [&str; 9] = [
    "fixture",
    "points",
    "sequences",
    "valid",
    "fertility",
    "valid_size_min",
    "valid_size_median",
    "valid_size_max",
    "truncated",
];

pub const SCATTER_HEADER: [&str; 3] = ["laps_to_max_exploration", "handled_fraction", "zeta"];

pub const TRACE_HEADER: [&str; 4] = ["laps", "explored", "successes", "handled_fraction"];

const NA: &str = "N/A";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

/// Fixed-point real with 6 decimals.
pub fn real(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_report<W: Write>(out: W, rows: &[ReportRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.fixture.clone(),
            real(r.zeta),
            r.seed.to_string(),
            r.points.to_string(),
            r.explored.to_string(),
            r.valid.to_string(),
            real(r.handled_fraction),
            r.laps_to_max_exploration.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_to_string(rows: &[ReportRow]) -> String {
    let mut buf = Vec::new();
    write_report(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn read_report<R: Read>(input: R) -> Result<Vec<ReportRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(ReportError::Format(format!(
            "unexpected report header: {}",
            header.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(ReportError::from))
        .collect()
}

pub fn write_metrics<W: Write>(
    out: W,
    rows: &[(String, SearchSpaceMetrics)],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for (fixture, m) in rows {
        let (min, med, max) = match m.valid_sizes {
            Some((a, b, c)) => (a.to_string(), b.to_string(), c.to_string()),
            None => (NA.into(), NA.into(), NA.into()),
        };
        w.write_record([
            fixture.clone(),
            m.points.to_string(),
            m.sequences.to_string(),
            m.valid.to_string(),
            m.fertility().map_or_else(|| NA.to_string(), real),
            min,
            med,
            max,
            m.truncated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scatter<W: Write>(out: W, points: &[ParetoPoint]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCATTER_HEADER)?;
    for p in points {
        w.write_record([
            p.laps_to_max_exploration.to_string(),
            real(p.handled_fraction),
            real(p.zeta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, trace: &ConvergenceTrace) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for (i, (e, s)) in trace.explored.iter().zip(&trace.successes).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.to_string(),
            s.to_string(),
            real(trace.handled_fraction(i)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialized decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub root: Option<TreeNode>,
    /// Outcome label of the unmodified laps when no point activated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline: Option<String>,
    /// Dynamic activations per static point.
    pub activations: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Node {
        point: String,
        children: Vec<TreeBranch>,
    },
    Leaf {
        outcome: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeBranch {
    pub decision: String,
    pub child: TreeNode,
}

impl TreeJson {
    pub fn from_tree(tree: &DecisionTree) -> Self {
        TreeJson {
            root: tree.root.as_ref().map(node_json),
            baseline: tree.baseline.as_ref().map(|o| o.to_string()),
            activations: tree
                .activations
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

fn node_json(node: &Node) -> TreeNode {
    TreeNode::Node {
        point: node.point.to_string(),
        children: node
            .children
            .iter()
            .map(|b| TreeBranch {
                decision: b.decision.strategy.to_string(),
                child: match &b.child {
                    Child::Node(n) => node_json(n),
                    Child::Leaf(o) => TreeNode::Leaf {
                        outcome: o.to_string(),
                    },
                },
            })
            .collect(),
    }
}

/// Serialized portfolio: one entry per failure point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioJson {
    pub failure_point: String,
    pub patches: Vec<PatchJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchJson {
    pub sequence: Vec<String>,
    pub applications: u64,
    pub successes: u64,
    pub discovery_laps: u64,
}

impl PatchJson {
    pub fn to_patch(&self) -> Result<RuntimePatch, ReportError> {
        let sequence = self
            .sequence
            .iter()
            .map(|s| s.parse())
            .collect::<Result<DecisionSequence, _>>()
            .map_err(|e| ReportError::Format(format!("bad step: {e}")))?;
        Ok(RuntimePatch {
            sequence,
            applications: self.applications,
            successes: self.successes,
            discovery_laps: self.discovery_laps,
        })
    }
}

pub fn portfolio_json(portfolio: &Portfolio) -> Vec<PortfolioJson> {
    portfolio
        .failure_points()
        .map(|(point, patches)| PortfolioJson {
            failure_point: point.to_string(),
            patches: patches
                .iter()
                .map(|p| PatchJson {
                    sequence: p.sequence.to_strings(),
                    applications: p.applications,
                    successes: p.successes,
                    discovery_laps: p.discovery_laps,
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(fixture: &str, zeta: f64, handled: f64) -> ReportRow {
        ReportRow {
            fixture: fixture.into(),
            zeta,
            seed: 7,
            points: 2,
            explored: 5,
            valid: 3,
            handled_fraction: handled,
            laps_to_max_exploration: 12,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            report_to_string(&[]),
            "fixture,zeta,seed,points,explored,valid,handled_fraction,laps_to_max_exploration\n"
        );
    }

    #[test]
    fn reals_round_half_to_even() {
        assert_eq!(real(0.0078125), "0.007812");
        assert_eq!(real(0.0234375), "0.023438");
        assert_eq!(real(1.0), "1.000000");
        assert_eq!(real(0.1), "0.100000");
    }

    #[test]
    fn report_round_trips_at_six_digits() {
        let rows = vec![row("a", 0.3, 0.77), row("b", 1.0, 0.5)];
        let text = report_to_string(&rows);
        assert!(text.contains("a,0.300000,7,2,5,3,0.770000,12\n"), "{text}");
        let back = read_report(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_report("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn undefined_metrics_are_marked() {
        let m = SearchSpaceMetrics::from_leaves(0, std::iter::empty(), false);
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[("nonull".into(), m)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1),
            Some("nonull,0,0,0,N/A,N/A,N/A,N/A,false")
        );
    }

    #[test]
    fn rows_round_trip_through_json() {
        let rows = vec![row("a", 0.1, 1.0 / 3.0)];
        let text = serde_json::to_string(&rows).unwrap();
        let back: Vec<ReportRow> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rows);
    }
}
