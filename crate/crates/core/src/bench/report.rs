//! Report rows and the files written for each run.

use super::{BenchError, Metrics};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    SingleObject,
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub object: String,
    pub set: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub objects: usize,
    pub cleared: bool,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub name: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kind: ReportKind,
    pub name: String,
    pub policy: String,
    pub config_hash: String,
    pub model_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub objects: Vec<ObjectRow>,
    pub trials: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl BenchReport {
    pub fn aggregate(&self, name: &str) -> Option<&Metrics> {
        self.aggregates.iter().find(|a| a.name == name).map(|a| &a.metrics)
    }

    /// The pooled row over everything evaluated.
    pub fn overall(&self) -> &Metrics {
        self.aggregate("all").expect("every report has an `all` row")
    }

    /// Every emitted row, in CSV order.
    pub fn rows(&self) -> Vec<(String, &Metrics)> {
        let mut rows: Vec<(String, &Metrics)> = Vec::new();
        rows.extend(self.objects.iter().map(|o| (o.object.clone(), &o.metrics)));
        rows.extend(self.trials.iter().map(|t| (format!("trial-{}", t.trial), &t.metrics)));
        rows.extend(self.aggregates.iter().map(|a| (a.name.clone(), &a.metrics)));
        rows
    }

    /// Checks that count identities hold on every row, that `mpph`
    /// matches its row to `tol`, and that aggregates pool their members.
    pub fn check_identities(&self, tol: f64) -> Result<(), String> {
        for (name, m) in self.rows() {
            if m.successes + m.failures != m.attempts || m.successes > m.attempts {
                return Err(format!("{name}: counts do not add up"));
            }
            if m.attempts > 0 && m.success_rate != m.successes as f64 / m.attempts as f64 {
                return Err(format!("{name}: success rate differs from counts"));
            }
            if !m.mpph_consistent(tol) {
                return Err(format!("{name}: mpph {} differs from its row", m.mpph));
            }
        }
        let members: Vec<&Metrics> = match self.kind {
            ReportKind::SingleObject => self.objects.iter().map(|o| &o.metrics).collect(),
            ReportKind::Clutter => self.trials.iter().map(|t| &t.metrics).collect(),
        };
        let all = self.overall();
        let attempts: usize = members.iter().map(|m| m.attempts).sum();
        let successes: usize = members.iter().map(|m| m.successes).sum();
        if attempts != all.attempts || successes != all.successes {
            return Err("`all` row does not pool its members".into());
        }
        for o in &self.objects {
            if self.aggregate(&o.set).is_none() {
                return Err(format!("no aggregate for set {}", o.set));
            }
        }
        for a in &self.aggregates {
            if a.name == "all" {
                continue;
            }
            let rows: Vec<&Metrics> = self.objects.iter().filter(|o| o.set == a.name).map(|o| &o.metrics).collect();
            let s: usize = rows.iter().map(|m| m.successes).sum();
            let n: usize = rows.iter().map(|m| m.attempts).sum();
            if (s, n) != (a.metrics.successes, a.metrics.attempts) {
                return Err(format!("aggregate {} does not pool its objects", a.name));
            }
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `report.json`, `summary.csv` (one row per object or trial and per
/// aggregate) and `config.json` (the exact spec plus hashes).
pub fn emit_report<C: Serialize>(report: &BenchReport, config: &C, dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;

    let mut csv = Vec::new();
    writeln!(csv, "name,attempts,successes,success_rate,t_c,t_e,mpph")?;
    for (name, m) in report.rows() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            csv_field(&name),
            m.attempts,
            m.successes,
            m.success_rate,
            m.t_c,
            m.t_e,
            m.mpph
        )?;
    }
    fs::write(dir.join("summary.csv"), csv)?;

    let cfg = serde_json::json!({
        "config": config,
        "config_hash": report.config_hash,
        "model_hash": report.model_hash,
        "seeds": report.seeds,
    });
    fs::write(dir.join("config.json"), serde_json::to_vec_pretty(&cfg)?)?;
    Ok(())
}
