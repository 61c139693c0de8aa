use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::TestResult;
use crate::error::Result;

/// Result of one registry experiment. Everything except `runtime_s` is a
/// deterministic function of the experiment id, parameters and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub title: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    pub tests: Vec<TestResult>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub runtime_s: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        !self.tests.is_empty() && self.tests.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestResult> {
        self.tests.iter().filter(|t| !t.passed)
    }

    /// The report without its runtime, as pretty JSON.
    pub fn body_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("runtime_s");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<dir>/<id>.json` and returns its path.
    pub fn write_to(&self, dir: &FsPath) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.experiment_id));
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }

    /// One line per test.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} {}: {}\n",
            self.experiment_id,
            self.title,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for t in &self.tests {
            let measure = match (t.p_value, t.error) {
                (Some(p), _) => format!("p = {p:.4}"),
                (None, Some(e)) => format!("error = {e:.3e}"),
                _ => String::new(),
            };
            s.push_str(&format!(
                "  [{}] {} (statistic {:.6}, {}, threshold {}, n = {})\n",
                if t.passed { "pass" } else { "FAIL" },
                t.name,
                t.statistic,
                measure,
                t.threshold,
                t.n_samples
            ));
        }
        s
    }
}
