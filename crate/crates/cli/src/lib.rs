//! Experiment harness for the admission-control toolkit: configuration,
//! replication orchestration, aggregation, analysis reports and SVG plots.
//! The `nortonq` binary is a thin CLI over this crate.

pub mod aggregate;
pub mod config;
pub mod oracle;
pub mod report;
pub mod run;
pub mod svg;
