//! Run reports: pass/fail checks, CSV and plot-data artifacts, and the JSON summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::fit::DecaySeries;
use crate::scenario::Pipeline;

/// The schema every summary.json follows.
pub const SUMMARY_SCHEMA: &str = include_str!("../schemas/summary.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion number, if the check is one.
    pub criterion: Option<u8>,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: Option<u8>, name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            criterion,
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// A check that could not be evaluated.
    pub fn error(criterion: Option<u8>, name: &str, e: &LabError) -> Self {
        Self::new(criterion, name, false, format!("error: {e}"))
    }
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

/// Small CSV builder with fixed float formatting.
#[derive(Clone, Debug)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            text: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn artifact(self, file: &str) -> Artifact {
        Artifact {
            file: file.into(),
            contents: self.text,
        }
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario: String,
    pub pipeline: Pipeline,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, Value>,
    pub artifacts: Vec<Artifact>,
    pub series: Vec<DecaySeries>,
}

impl RunReport {
    pub fn new(scenario: &str, pipeline: Pipeline) -> Self {
        Self {
            scenario: scenario.into(),
            pipeline,
            checks: Vec::new(),
            values: BTreeMap::new(),
            artifacts: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.into(), serde_json::to_value(v).expect("summary value serializes"));
    }

    pub fn summary(&self) -> Value {
        let mut files: Vec<String> = self.artifacts.iter().map(|a| a.file.clone()).collect();
        files.extend(self.series.iter().map(|s| format!("{}.dat", s.name)));
        serde_json::json!({
            "scenario": self.scenario,
            "pipeline": self.pipeline.name(),
            "passed": self.passed(),
            "checks": self.checks,
            "values": self.values,
            "artifacts": files,
        })
    }
}

/// Writes every artifact, one plot-data file per decay series, and summary.json.
pub fn emit_report(report: &RunReport, out: &Path) -> Result<Vec<PathBuf>> {
    if report.checks.is_empty() && report.artifacts.is_empty() && report.series.is_empty() {
        return Err(LabError::IoError(format!(
            "nothing to report for scenario '{}': no checks, artifacts or series",
            report.scenario
        )));
    }
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for a in &report.artifacts {
        let p = out.join(&a.file);
        std::fs::write(&p, &a.contents)?;
        written.push(p);
    }
    for s in &report.series {
        let p = out.join(format!("{}.dat", s.name));
        std::fs::write(&p, s.plot_data())?;
        written.push(p);
    }
    let summary = report.summary();
    validate_summary(&summary)?;
    let p = out.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n")?;
    written.push(p);
    Ok(written)
}

fn type_matches(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "null" => v.is_null(),
        _ => false,
    }
}

/// Checks `type`, `required`, `properties` and `items`, the subset the bundled schema uses.
fn conforms(v: &Value, schema: &Value, path: &str) -> std::result::Result<(), String> {
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(v, s),
            Value::Array(ts) => ts.iter().filter_map(|t| t.as_str()).any(|t| type_matches(v, t)),
            _ => true,
        };
        if !ok {
            return Err(format!("{path}: expected type {t}"));
        }
    }
    if let (Some(req), Some(obj)) = (schema.get("required").and_then(|r| r.as_array()), v.as_object()) {
        for k in req.iter().filter_map(|k| k.as_str()) {
            if !obj.contains_key(k) {
                return Err(format!("{path}: missing '{k}'"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (schema.get("properties").and_then(|p| p.as_object()), v.as_object()) {
        for (k, sub) in props {
            if let Some(x) = obj.get(k) {
                conforms(x, sub, &format!("{path}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            conforms(x, items, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

pub fn validate_summary(summary: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(SUMMARY_SCHEMA)?;
    conforms(summary, &schema, "summary").map_err(|e| LabError::ConfigError(format!("summary schema: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunReport::new("empty", Pipeline::Phase);
        match emit_report(&r, dir.path()) {
            Err(LabError::IoError(m)) => assert!(m.contains("nothing to report")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn summary_and_plot_data_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RunReport::new("demo", Pipeline::Cgo);
        r.checks.push(Check::new(Some(3), "decay", true, "ok"));
        r.value("ratio_bounded", true);
        let tau = vec![8.0, 16.0, 32.0];
        r.series.push(DecaySeries::new("decay", tau.clone(), tau.iter().map(|t| 1.0 / t).collect()));
        let mut csv = Csv::new("a,b");
        csv.row(&[num(1.0), num(2.0)]);
        r.artifacts.push(csv.artifact("t.csv"));
        emit_report(&r, dir.path()).unwrap();
        let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        validate_summary(&s).unwrap();
        let dat = std::fs::read_to_string(dir.path().join("decay.dat")).unwrap();
        let slope: f64 = dat.lines().next().unwrap().split("slope=").nth(1).unwrap().parse().unwrap();
        assert!((slope + 1.0).abs() < 1e-9);
        // the reader can recompute the slope from the columns
        let pts: Vec<(f64, f64)> = dat
            .lines()
            .skip(2)
            .map(|l| {
                let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        let s2 = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        assert!((s2 + 1.0).abs() < 1e-9);
    }

    #[test]
    fn schema_rejects_missing_keys() {
        assert!(validate_summary(&serde_json::json!({"scenario": "x"})).is_err());
    }
}
