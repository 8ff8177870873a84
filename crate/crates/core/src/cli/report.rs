use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A named pass/fail criterion with the measured value behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// The canonical report: deterministic given config, seed and chunk plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, config: &impl Serialize, results: Value, checks: Vec<Check>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            pass: checks.iter().all(|c| c.pass),
            results,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &str, rows: impl IntoIterator<Item = String>) -> Self {
        let mut csv = String::from(header);
        csv.push('\n');
        for r in rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        Self {
            name: name.into(),
            csv,
        }
    }
}

/// Everything a subcommand produces.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
    /// Extra files written next to the report.
    pub artifacts: Vec<(String, String)>,
    /// A search ran out of budget.
    pub exhausted: bool,
}

impl Outcome {
    pub fn new(report: Report, tables: Vec<Table>) -> Self {
        Self {
            report,
            tables,
            artifacts: Vec::new(),
            exhausted: false,
        }
    }
}

/// A float as JSON, with non-finite values written as strings.
pub(crate) fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::from(crate::serde_ext::csv_f64(v))
    }
}
