//! Check entries and suite reports shared by the library checks and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckEntry {
    pub suite: String,
    pub check: String,
    pub location: String,
    pub parameter: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckEntry {
    /// Passes when `residual ≤ tolerance` (NaN never passes).
    pub fn new(suite: &str, check: &str, location: impl Into<String>, parameter: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckEntry {
            suite: suite.into(),
            check: check.into(),
            location: location.into(),
            parameter: parameter.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// An entry that must exceed `threshold` to pass (negative controls).
    pub fn expect_above(suite: &str, check: &str, location: impl Into<String>, parameter: impl Into<String>, residual: f64, threshold: f64) -> Self {
        CheckEntry {
            suite: suite.into(),
            check: check.into(),
            location: location.into(),
            parameter: parameter.into(),
            residual,
            tolerance: threshold,
            pass: residual > threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilySummary {
    pub check: String,
    pub count: usize,
    pub max_residual: f64,
    pub pass: bool,
}

/// Per-check aggregation in first-seen order.
pub fn summarize(entries: &[CheckEntry]) -> Vec<FamilySummary> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, FamilySummary> = BTreeMap::new();
    for e in entries {
        let f = acc.entry(e.check.clone()).or_insert_with(|| {
            order.push(e.check.clone());
            FamilySummary { check: e.check.clone(), count: 0, max_residual: 0.0, pass: true }
        });
        f.count += 1;
        f.max_residual = f.max_residual.max(e.residual);
        f.pass &= e.pass;
    }
    order.into_iter().map(|k| acc.remove(&k).unwrap()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: String,
    pub pass: bool,
    pub families: Vec<FamilySummary>,
    pub notes: Vec<String>,
    pub entries: Vec<CheckEntry>,
}

impl SuiteReport {
    pub fn new(suite: &str, entries: Vec<CheckEntry>, notes: Vec<String>) -> Self {
        SuiteReport {
            schema: SCHEMA,
            suite: suite.into(),
            pass: entries.iter().all(|e| e.pass),
            families: summarize(&entries),
            notes,
            entries,
        }
    }

    /// Largest residual among entries with an upper-bound tolerance.
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().filter(|e| e.residual <= e.tolerance || !e.pass).map(|e| e.residual).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub pass: bool,
    pub checks: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub campaign: String,
    pub pass: bool,
    pub max_residual: f64,
    pub suites: Vec<SuiteSummary>,
}

impl RunSummary {
    pub fn new(campaign: &str, reports: &[SuiteReport]) -> Self {
        let suites: Vec<SuiteSummary> = reports
            .iter()
            .map(|r| SuiteSummary { suite: r.suite.clone(), pass: r.pass, checks: r.entries.len(), max_residual: r.max_residual() })
            .collect();
        RunSummary {
            schema: SCHEMA,
            campaign: campaign.into(),
            pass: suites.iter().all(|s| s.pass),
            max_residual: suites.iter().map(|s| s.max_residual).fold(0.0, f64::max),
            suites,
        }
    }
}
