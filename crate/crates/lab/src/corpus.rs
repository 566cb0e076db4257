//! Fixture programs shipped with the harness and their expected exhaustive metrics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A corpus program.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
}

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        &[$(Fixture {
            name: $name,
            source: include_str!(concat!("../fixtures/", $name, ".mls")),
        }),*]
    };
}

pub const FIXTURES: &[Fixture] = fixtures![
    "allvalid",
    "barren",
    "cascade2",
    "deep",
    "disparate",
    "half",
    "needle",
    "nonull",
    "session",
    "unary",
];

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

/// Directory holding the fixture files in the source tree.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Expected exhaustive metrics of one fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub fixture: String,
    pub points: usize,
    pub sequences: u64,
    pub valid: u64,
    /// (min, median, max); absent when nothing is valid.
    pub valid_sizes: Option<[usize; 3]>,
    pub truncated: bool,
    /// Cap the expectation was computed with.
    pub cap: u64,
}

pub fn manifest() -> Vec<ManifestEntry> {
    serde_json::from_str(include_str!("../fixtures/manifest.json"))
        .expect("bundled manifest is valid JSON")
}
