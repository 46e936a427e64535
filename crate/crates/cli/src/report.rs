//! Structured run reports. Wall-clock timings are kept apart so that a
//! report depends only on the configuration and the seed.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use vlhardy_core::bounds::{SandwichReport, Theorem};
use vlhardy_core::charf::{CharacterizationValue, ScalePoint};
use vlhardy_core::partition::{Decomposition, Quadrant};
use vlhardy_core::witness::{CheckLine, WitnessCheck};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }
}

/// One functional value on the `s` grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridValue {
    pub s: ScalePoint,
    pub value: CharacterizationValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizeSection {
    pub functional: String,
    /// Exact form of the evaluated functional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    pub s_grid: usize,
    pub values: Vec<GridValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSummary {
    pub value: f64,
    pub resolution: usize,
    pub iterations: usize,
    pub converged: bool,
    pub starts: Vec<(String, f64)>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionSummary {
    pub function: String,
    pub ii: BTreeMap<Quadrant, f64>,
    pub total_lhs: f64,
    pub sum: f64,
    pub margin: f64,
    pub k_range: [(i64, i64); 2],
    pub truncated: [bool; 2],
    pub nonzero_terms: usize,
}

impl PartitionSummary {
    pub fn new(function: &str, d: &Decomposition, k_range: [(i64, i64); 2], truncated: [bool; 2]) -> Self {
        PartitionSummary {
            function: function.to_string(),
            ii: Quadrant::ALL.into_iter().zip(d.ii).collect(),
            total_lhs: d.total_lhs,
            sum: d.sum(),
            margin: d.margin,
            k_range,
            truncated,
            nonzero_terms: d.terms.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub theorem: Theorem,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub characterize: Option<CharacterizeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<SandwichReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_estimate: Option<NormSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witness_checks: Vec<WitnessCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub partition: Vec<PartitionSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Failed checks with their margins.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<CheckLine>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, theorem: Theorem, seed: u64, config: BTreeMap<String, String>) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            theorem,
            seed,
            config,
            tolerances: BTreeMap::new(),
            characterize: None,
            sandwich: None,
            norm_estimate: None,
            witness_checks: Vec::new(),
            partition: Vec::new(),
            checks: Vec::new(),
            verdict: None,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Collects failing lines from the checks and witness chains and sets
    /// the verdict.
    pub fn conclude(&mut self) {
        let mut failures: Vec<CheckLine> = self
            .checks
            .iter()
            .filter(|l| !l.passed && !l.informational)
            .cloned()
            .collect();
        for w in &self.witness_checks {
            failures.extend(w.lines.iter().filter(|l| !l.passed && !l.informational).cloned());
        }
        self.verdict = Some(if failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        });
        self.failures = failures;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Default)]
pub struct Timings {
    stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn extend(&mut self, prefix: &str, other: Timings) {
        self.stages
            .extend(other.stages.into_iter().map(|(k, v)| (format!("{prefix}{k}"), v)));
    }

    pub fn to_json(&self) -> String {
        let map: Vec<serde_json::Value> = self
            .stages
            .iter()
            .map(|(k, v)| serde_json::json!({ "stage": k, "seconds": v }))
            .collect();
        let mut s = serde_json::to_string_pretty(&map).expect("timings serialize");
        s.push('\n');
        s
    }
}
