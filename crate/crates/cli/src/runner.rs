//! Batch execution: run a configured suite into a report, and replay single
//! witnesses from reports.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{CheckResult, ExperimentReport};
use crate::suites::run_suite;
use metriclab_core::curvature::Witness;
use std::path::Path;
use std::time::Instant;

/// Run the configured suite. Exit-code semantics: 0 when every check passed,
/// 1 when any violation was found, 2 on configuration or runtime errors
/// (returned as `Err`).
pub fn run(config: &ExperimentConfig) -> Result<(ExperimentReport, i32)> {
    let started = Instant::now();
    let (checks, curves) = run_suite(config)?;
    let report =
        ExperimentReport::new(config.clone(), checks, started.elapsed().as_millis() as u64);
    if let Some(out) = &config.out {
        report.write_atomic(out)?;
        let stem = out.with_extension("");
        for (name, csv) in &curves {
            let path = format!("{}.{name}.csv", stem.display());
            std::fs::write(&path, csv)?;
        }
    }
    let code = if report.any_violation() { 1 } else { 0 };
    Ok((report, code))
}

/// One replayed witness: the residual it reproduces now, next to the stored
/// value when the file carried one.
#[derive(Debug)]
pub struct ReplayOutcome {
    pub check: String,
    pub stored: Option<f64>,
    pub replayed: f64,
}

/// Replayed witnesses plus the tool version recorded in the source file
/// (when it was a full report): a mismatch is worth a warning, not a
/// refusal — witnesses are self-contained.
#[derive(Debug)]
pub struct ReplayReport {
    pub outcomes: Vec<ReplayOutcome>,
    pub report_version: Option<String>,
}

impl ReplayReport {
    pub fn version_mismatch(&self) -> bool {
        self.report_version
            .as_deref()
            .is_some_and(|v| v != env!("CARGO_PKG_VERSION"))
    }
}

/// Replay every witness found in a file. Accepts a bare witness object, a
/// single check result, or a whole report.
pub fn replay(path: &Path) -> Result<ReplayReport> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("witness file: {e}")))?;

    let mut outcomes = Vec::new();
    if let Ok(witness) = serde_json::from_value::<Witness>(value.clone()) {
        outcomes.push(ReplayOutcome {
            check: "witness".into(),
            stored: None,
            replayed: witness.evaluate()?,
        });
        return Ok(ReplayReport {
            outcomes,
            report_version: None,
        });
    }
    if let Ok(check) = serde_json::from_value::<CheckResult>(value.clone()) {
        if let Some(w) = &check.witness {
            outcomes.push(ReplayOutcome {
                check: check.check.clone(),
                stored: Some(check.residual),
                replayed: w.evaluate()?,
            });
            return Ok(ReplayReport {
                outcomes,
                report_version: None,
            });
        }
    }
    if let Ok(report) = serde_json::from_value::<ExperimentReport>(value) {
        for check in &report.checks {
            if let Some(w) = &check.witness {
                outcomes.push(ReplayOutcome {
                    check: check.check.clone(),
                    stored: Some(check.residual),
                    replayed: w.evaluate()?,
                });
            }
        }
        if outcomes.is_empty() {
            return Err(CliError::Config("report contains no witnesses".into()));
        }
        return Ok(ReplayReport {
            outcomes,
            report_version: Some(report.tool_version.clone()),
        });
    }
    Err(CliError::Config(
        "file is neither a witness, a check result, nor a report".into(),
    ))
}
