//! JSON reports.

use serde::Serialize;
use serde_json::Value;

/// How a check's value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Residual at most the bound.
    AtMost,
    /// Quantity at least the bound.
    AtLeast,
    /// Negative control: some instance must fail.
    Detected,
}

/// One named identity or property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub tag: String,
    pub passed: bool,
    pub instances: usize,
    pub relation: Relation,
    pub value: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when the largest residual is at most `tolerance`.
    pub fn within(tag: impl Into<String>, instances: usize, max_residual: f64, tolerance: f64) -> Self {
        Self {
            tag: tag.into(),
            passed: max_residual <= tolerance,
            instances,
            relation: Relation::AtMost,
            value: max_residual,
            bound: tolerance,
            note: None,
        }
    }

    /// Passes when `value >= minimum`.
    pub fn at_least(tag: impl Into<String>, instances: usize, value: f64, minimum: f64) -> Self {
        Self { tag: tag.into(), passed: value >= minimum, instances, relation: Relation::AtLeast, value, bound: minimum, note: None }
    }

    /// A negative control; passes when at least one of the instances failed.
    /// The value is the largest residual seen.
    pub fn expect_failure(tag: impl Into<String>, instances: usize, failures: usize, max_residual: f64) -> Self {
        Self {
            tag: tag.into(),
            passed: failures > 0,
            instances,
            relation: Relation::Detected,
            value: max_residual,
            bound: 0.0,
            note: Some(format!("{failures} of {instances} instances detected")),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let cmp = match self.relation {
            Relation::AtMost => format!("{:e} <= {:e}", self.value, self.bound),
            Relation::AtLeast if self.value.abs() < 1e-3 => format!("{:e} >= {:e}", self.value, self.bound),
            Relation::AtLeast => format!("{:.4} >= {}", self.value, self.bound),
            Relation::Detected => format!("residual {:e} detected", self.value),
        };
        format!("{verdict} {} ({cmp}, {} instances)", self.tag, self.instances)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub yf_core: &'static str,
    pub yf_cli: &'static str,
}

pub const VERSIONS: Versions = Versions { yf_core: yf_core::VERSION, yf_cli: env!("CARGO_PKG_VERSION") };

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub versions: Versions,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Report {
    pub fn new(experiment: impl Into<String>, config_hash: String, checks: Vec<Check>, data: Value) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { experiment: experiment.into(), config_hash, versions: VERSIONS, passed, checks, data }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The checks as CSV rows.
    pub fn checks_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tag", "passed", "instances", "relation", "value", "bound"])?;
        for c in &self.checks {
            let relation = serde_json::to_value(c.relation).expect("relation serializes");
            w.write_record([
                c.tag.clone(),
                c.passed.to_string(),
                c.instances.to_string(),
                relation.as_str().unwrap_or_default().to_string(),
                format!("{:e}", c.value),
                format!("{:e}", c.bound),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}
