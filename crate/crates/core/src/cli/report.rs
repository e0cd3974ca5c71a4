//! Structured JSON reports.

use serde::Serialize;

use crate::curvature::Witness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct Entry {
    pub name: String,
    pub check: String,
    pub status: Status,
    pub max_residual: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub points: usize,
    pub entries: Vec<Entry>,
    pub summary: Summary,
}

impl Report {
    pub fn new(scenario: String, scenario_hash: String, seed: u64, points: usize, entries: Vec<Entry>) -> Self {
        let mut summary = Summary { total: entries.len(), ..Default::default() };
        for e in &entries {
            match e.status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Error => summary.errors += 1,
            }
        }
        Report { tool: "tworiem", version: env!("CARGO_PKG_VERSION"), scenario, scenario_hash, seed, points, entries, summary }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.passed == self.summary.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Replace every `wall_time` value by 0 so two reports can be compared.
pub fn strip_wall_time(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                if k == "wall_time" {
                    *x = serde_json::Value::from(0.0);
                } else {
                    strip_wall_time(x);
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}
