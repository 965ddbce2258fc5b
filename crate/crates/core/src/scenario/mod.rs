//! Scenario files: a chart, a metric and a recipe for a deformation tensor,
//! plus the checks to run on it.

mod bundled;
mod recipes;
mod report;
mod run;

pub use bundled::{bundled, bundled_names, find_bundled, BundledScenario};
pub use recipes::{
    CheckDirection, EnsembleSpec, IntegralFitSpec, IntegrationSpec, MetricFitSpec, PathSpec, Recipe, SubsystemKind,
    WhichSpec,
};
pub use report::{Evidence, Report, ReportCheck, Status, REPORT_VERSION};
pub use run::{convergence_order, ensemble, is_config_error, run, run_text, velocity_system, RunOptions, RunOutput};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::GeomError;
use crate::manifold::Chart;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("scenario is not valid JSON for the schema: {0}")]
    Schema(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("invalid scenario: {0}")]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub bounds: Vec<(f64, f64)>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    Chart::DEFAULT_MARGIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignatureSpec {
    #[default]
    Riemannian,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Free-form reference to the statement the scenario exercises.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub dim: usize,
    pub chart: ChartSpec,
    pub metric: Vec<Vec<String>>,
    #[serde(default)]
    pub signature: SignatureSpec,
    pub recipe: Recipe,
    /// Empty means the recipe's default check list.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Per-check references, echoed next to each check in the report.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub anchors: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl Scenario {
    /// Parses and validates; nothing is evaluated.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn chart(&self) -> Result<Chart, ConfigError> {
        let c = &self.chart;
        Ok(Chart::new(c.bounds.clone(), c.samples, c.seed, c.margin)?)
    }

    /// Checks run when the scenario does not list any.
    pub fn effective_checks(&self) -> Vec<String> {
        if self.checks.is_empty() {
            self.recipe.default_checks().iter().map(|s| s.to_string()).collect()
        } else {
            self.checks.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.dim;
        if n == 0 {
            return Err(ConfigError::Invalid("dim must be at least 1".into()));
        }
        if self.chart.bounds.len() != n {
            return Err(ConfigError::Invalid(format!(
                "chart has {} intervals for dim {n}",
                self.chart.bounds.len()
            )));
        }
        self.chart()?;
        if self.metric.len() != n || self.metric.iter().any(|r| r.len() != n) {
            return Err(ConfigError::Invalid(format!(
                "metric must be a {n}x{n} matrix of expressions"
            )));
        }
        for row in &self.metric {
            for e in row {
                crate::expr::parse(e, n).map_err(|err| ConfigError::Invalid(format!("metric entry `{e}`: {err}")))?;
            }
        }
        self.recipe.validate(n)?;
        let known = self.recipe.known_checks();
        for c in &self.checks {
            if !known.iter().any(|(k, _)| k == c) {
                let names: Vec<&str> = known.iter().map(|(k, _)| *k).collect();
                return Err(ConfigError::Invalid(format!(
                    "check `{c}` is not available for recipe `{}`; available: {}",
                    self.recipe.kind(),
                    names.join(", ")
                )));
            }
        }
        for (c, t) in &self.tolerances {
            if !known.iter().any(|(k, _)| k == c) && c != "classify" {
                return Err(ConfigError::Invalid(format!("tolerance given for unknown check `{c}`")));
            }
            if !(t.is_finite() && *t >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "tolerance for `{c}` must be finite and >= 0"
                )));
            }
        }
        self.recipe.validate_checks(&self.effective_checks())?;
        Ok(())
    }
}
