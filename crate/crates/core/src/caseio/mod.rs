//! Case files, run manifests and result files.

mod case;
mod manifest;
mod report;
mod run;
#[cfg(test)]
mod tests;

pub use case::{
    parse_case, parse_case_str, BranchEntry, BusEntry, CaseFile, DefaultedField, GflEntry, LoadEntry, ParsedCase,
    SgControlKind, SgEntry, SystemSection,
};
pub use manifest::{
    parse_variant, parse_variant_list, CaseSource, CompareEntry, DisturbanceEntry, RunManifest, SweepEntry, SweepMode,
};
pub use report::{model_summary, GflRows, ModelSummary};
pub use run::{
    csv_header, run, run_sweeps, write_metrics, write_scenario_csv, write_sweep_csv, RunReport, FAILURE_MARKER,
    METRICS_FILE,
};

use crate::analysis::AnalysisError;
use crate::network::NetworkError;
use crate::sim::SimError;

/// Cases shipped with the crate.
pub const BUNDLED_CASES: &[(&str, &str)] = &[
    ("wecc9_gfl", include_str!("cases/wecc9_gfl.toml")),
    ("two_bus", include_str!("cases/two_bus.toml")),
];

pub fn bundled_case(name: &str) -> Option<&'static str> {
    BUNDLED_CASES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" (line {line})")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("missing field {field}{}", at_line(*line))]
    Missing { field: String, line: usize },
    #[error("invalid {field}{}: {message}", at_line(*line))]
    Invalid { field: String, line: usize, message: String },
    #[error("{field} refers to bus {bus}, which is not defined")]
    UnknownBus { field: String, bus: u32 },
    #[error("slack {name} is scheduled at {scheduled} pu but the power flow gives {solved:.6} pu (tolerance {tolerance})")]
    Dispatch { name: String, scheduled: f64, solved: f64, tolerance: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
