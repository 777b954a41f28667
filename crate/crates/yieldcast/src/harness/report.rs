//! Experiment report: the model-to-RMSE comparison ledger plus warnings.

use std::fmt::Write as _;

use serde::Serialize;

/// Result row for one configured model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelOutcome {
    pub name: String,
    /// Test RMSE; None when the model failed.
    pub rmse: Option<f64>,
    pub runtime_ms: u128,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ModelOutcome>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn row(&self, name: &str) -> Option<&ModelOutcome> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn all_completed(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }

    /// Rows sorted by RMSE ascending; failures sink to the bottom.
    pub fn sorted_rows(&self) -> Vec<&ModelOutcome> {
        let mut rows: Vec<&ModelOutcome> = self.rows.iter().collect();
        rows.sort_by(|a, b| match (a.rmse, b.rmse) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.name.cmp(&b.name),
        });
        rows
    }

    /// Deterministic comparison table: model name and RMSE only, sorted by
    /// RMSE ascending (the byte-identical artifact; runtimes live in the
    /// JSON report).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,test_rmse\n");
        for row in self.sorted_rows() {
            match row.rmse {
                Some(r) => {
                    let _ = writeln!(out, "{},{}", row.name, r);
                }
                None => {
                    let _ = writeln!(out, "{},failed", row.name);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
