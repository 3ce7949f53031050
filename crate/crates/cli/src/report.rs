//! Machine-readable experiment reports, schema `v1`. Reports are
//! deterministic given (config, seed) up to the wall-clock field.

use crate::config::ExperimentConfig;
use metriclab_core::curvature::Witness;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Violation,
    Inconclusive,
}

/// One executed check: its verdict, the governing residual, the derived seed
/// it ran under, an optional replayable witness and free-form details.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub details: Option<Value>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub checks: Vec<CheckResult>,
    /// Timing; excluded from reproducibility comparisons.
    pub wall_clock_ms: u64,
    pub tool_version: String,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, mut checks: Vec<CheckResult>, wall_clock_ms: u64) -> Self {
        // Deterministic assembly: ordered by check name.
        checks.sort_by(|a, b| a.check.cmp(&b.check));
        Self {
            version: SCHEMA_VERSION.to_string(),
            config,
            checks,
            wall_clock_ms,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn any_violation(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Violation)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write atomically: temp file in the target directory, then rename.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name()
                .and_then(|s| s.to_str())
                .unwrap_or("report")
        ));
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// The report with timing and the output path stripped, for byte-wise
    /// reproducibility checks: neither affects what was computed.
    pub fn reproducible_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_clock_ms = 0;
        clone.config.out = None;
        clone.to_json()
    }
}

/// Side-file emission for curves: CSV rows of (radius, value, stderr).
pub fn curve_csv(radii: &[f64], values: &[f64], stderrs: &[f64]) -> String {
    let mut out = String::from("radius,value,stderr\n");
    for ((r, v), s) in radii.iter().zip(values).zip(stderrs) {
        out.push_str(&format!("{r},{v},{s}\n"));
    }
    out
}
