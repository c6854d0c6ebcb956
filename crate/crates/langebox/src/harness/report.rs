//! Report emission: JSON for machines, CSV for plots, and the experiment
//! manifest that makes a run replayable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Write a serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Write a table as CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to re-run a pipeline bit-identically in serial mode:
/// the resolved configuration, the seeds, the code version, and where each
/// stage wrote its artifacts. The timestamp is informational and is the one
/// field exempt from reproducibility comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub code_version: String,
    pub timestamp_utc: String,
    pub seed: u64,
    pub deterministic: bool,
    pub threads: usize,
    pub config: toml::Value,
    pub artifacts: BTreeMap<String, String>,
}

impl ExperimentManifest {
    pub fn new(command: &str, seed: u64, deterministic: bool, threads: usize, config: toml::Value) -> Self {
        ExperimentManifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_utc: chrono::Utc::now().to_rfc3339(),
            seed,
            deterministic,
            threads,
            config,
            artifacts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, stage: &str, path: &Path) {
        self.artifacts
            .insert(stage.to_string(), path.display().to_string());
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Format a float for CSV output: shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    let mut buf = ryu_like(x);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("nan") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(x: f64) -> String {
    // `{:?}` uses the shortest round-trip representation for f64
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -7.25, 123456.789] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_and_json_emission() {
        let dir = tempfile::tempdir().unwrap();
        let j = dir.path().join("r.json");
        write_json(&j, &serde_json::json!({"a": 1})).unwrap();
        assert!(j.exists());
        let c = dir.path().join("t.csv");
        write_csv(&c, &["x", "y"], &[vec!["1".into(), "2".into()]]).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        assert!(text.starts_with("x,y"));
    }
}
