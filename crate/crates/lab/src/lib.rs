//! Experiment harness, report formats, the fixture corpus and the
//! command-line front end built on [`banditlab_core`].

pub use banditlab_core as core;

pub mod cli;
pub mod corpus;
pub mod harness;
pub mod report;
