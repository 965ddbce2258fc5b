use std::collections::BTreeMap;

use serde::Serialize;

use super::CheckDirection;
use crate::frobenius::{Classification, Verdict};
use crate::serial::{f17, f17_vec, F17};

pub const REPORT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NumericalError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::NumericalError => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCheck {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub direction: CheckDirection,
    #[serde(serialize_with = "f17")]
    pub max_residual: f64,
    #[serde(serialize_with = "f17")]
    pub mean_residual: f64,
    #[serde(serialize_with = "f17_vec")]
    pub worst_point: Vec<f64>,
    pub samples: usize,
    /// Upper bound for `at_most` checks, threshold for `at_least` ones.
    #[serde(serialize_with = "f17")]
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportCheck {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Evidence {
    Number(F17),
    Vector(Vec<F17>),
    Matrix(Vec<Vec<F17>>),
    Text(String),
}

impl Evidence {
    pub fn vector(xs: &[f64]) -> Self {
        Evidence::Vector(xs.iter().copied().map(F17).collect())
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Self {
        Evidence::Matrix(rows.iter().map(|r| r.iter().copied().map(F17).collect()).collect())
    }
}

/// Everything a run produces. Serialization is deterministic: maps are
/// ordered and floats carry 17 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub scenario: serde_json::Value,
    pub status: Status,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub checks: Vec<ReportCheck>,
    pub metrics: BTreeMap<String, F17>,
    pub evidence: BTreeMap<String, Evidence>,
    pub notices: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&ReportCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.0)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
