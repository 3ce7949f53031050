//! Experiment configuration: a flat key-value text format with optional
//! `[section]` headers (keys inside a section are read as `section.key`), or
//! the same fields as a JSON object.

use crate::error::{CliError, Result};
use metriclab_core::SpaceSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Which verification suite to execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Curvature,
    Angles,
    Strainers,
    Tangent,
    Dimension,
    Strata,
    All,
}

impl SuiteName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "curvature" => SuiteName::Curvature,
            "angles" => SuiteName::Angles,
            "strainers" => SuiteName::Strainers,
            "tangent" => SuiteName::Tangent,
            "dimension" => SuiteName::Dimension,
            "strata" => SuiteName::Strata,
            "all" => SuiteName::All,
            other => {
                return Err(CliError::Config(format!(
                    "unknown suite {other:?} (expected curvature | angles | strainers | tangent | dimension | strata | all)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Curvature => "curvature",
            SuiteName::Angles => "angles",
            SuiteName::Strainers => "strainers",
            SuiteName::Tangent => "tangent",
            SuiteName::Dimension => "dimension",
            SuiteName::Strata => "strata",
            SuiteName::All => "all",
        }
    }
}

/// Per-suite tunables, all optional in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteParams {
    /// Strainer quality parameter.
    pub delta: f64,
    /// Highest strainer level the strainer checks probe.
    pub k_max: usize,
    /// Randomized-inequality trial budget.
    pub trials: usize,
    /// Monte-Carlo sample budget.
    pub samples: usize,
    /// Radii for volume curves.
    pub radii: Vec<f64>,
    /// Blow-up scales.
    pub scales: Vec<f64>,
    /// Override the declared concavity constant S in the curvature suite,
    /// e.g. to hunt counterexamples below the true constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_override: Option<f64>,
    /// Override the declared semi-convexity constant C likewise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_override: Option<f64>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            k_max: 2,
            trials: 20_000,
            samples: 40_000,
            radii: vec![0.25, 0.5, 0.75, 1.0],
            scales: vec![1.0, 0.5, 0.25],
            s_override: None,
            c_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Space description, e.g. `kind=lp p=4 n=2`.
    pub space: String,
    pub suite: SuiteName,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: SuiteParams,
}

impl ExperimentConfig {
    pub fn space_spec(&self) -> Result<SpaceSpec> {
        Ok(SpaceSpec::parse(&self.space)?)
    }

    /// Parse a config file: JSON when the first non-blank byte is `{`,
    /// otherwise flat key-value lines.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let mut config = if trimmed.starts_with('{') {
            serde_json::from_str::<ExperimentConfig>(text)
                .map_err(|e| CliError::Config(format!("JSON config: {e}")))?
        } else {
            Self::parse_flat(text)?
        };
        // Environment override for trial budgets.
        if let Ok(t) = std::env::var("METRICLAB_TRIALS") {
            config.params.trials = t
                .parse::<usize>()
                .map_err(|_| CliError::Config("METRICLAB_TRIALS must be an integer".into()))?;
        }
        // Validate the space description early.
        config.space_spec()?.build()?;
        if config.params.delta <= 0.0 || config.params.delta >= 0.5 {
            return Err(CliError::Config(format!(
                "delta = {} must lie in (0, 1/2)",
                config.params.delta
            )));
        }
        Ok(config)
    }

    fn parse_flat(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected key = value, got {line:?}",
                    lineno + 1
                )));
            };
            let key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            fields.insert(key, value.trim().to_string());
        }
        let take = |fields: &mut BTreeMap<String, String>, name: &str| -> Option<String> {
            // Accept both bare and sectioned spellings.
            fields
                .remove(name)
                .or_else(|| fields.remove(&format!("suite.{name}")))
                .or_else(|| fields.remove(&format!("output.{name}")))
                .or_else(|| fields.remove(&format!("space.{name}")))
        };
        let space = take(&mut fields, "space")
            .ok_or_else(|| CliError::Config("missing space description (key `space`)".into()))?;
        let suite = SuiteName::parse(
            &take(&mut fields, "suite")
                .or_else(|| fields.remove("suite.name"))
                .ok_or_else(|| CliError::Config("missing suite name (key `suite`)".into()))?,
        )?;
        let mut params = SuiteParams::default();
        let mut config = ExperimentConfig {
            space,
            suite,
            seed: 0,
            out: None,
            params: SuiteParams::default(),
        };
        if let Some(seed) = take(&mut fields, "seed") {
            config.seed = seed
                .parse()
                .map_err(|_| CliError::Config(format!("seed {seed:?} is not an integer")))?;
        }
        if let Some(out) = take(&mut fields, "out") {
            config.out = Some(PathBuf::from(out));
        }
        let num = |v: &str, key: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| CliError::Config(format!("field {key} is not a number: {v:?}")))
        };
        let list = |v: &str, key: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| num(s.trim(), key))
                .collect::<Result<Vec<f64>>>()
        };
        if let Some(v) = take(&mut fields, "delta") {
            params.delta = num(&v, "delta")?;
        }
        if let Some(v) = take(&mut fields, "k_max") {
            params.k_max = num(&v, "k_max")? as usize;
        }
        if let Some(v) = take(&mut fields, "trials") {
            params.trials = num(&v, "trials")? as usize;
        }
        if let Some(v) = take(&mut fields, "samples") {
            params.samples = num(&v, "samples")? as usize;
        }
        if let Some(v) = take(&mut fields, "radii") {
            params.radii = list(&v, "radii")?;
        }
        if let Some(v) = take(&mut fields, "scales") {
            params.scales = list(&v, "scales")?;
        }
        if let Some(v) = take(&mut fields, "s_override") {
            params.s_override = Some(num(&v, "s_override")?);
        }
        if let Some(v) = take(&mut fields, "c_override") {
            params.c_override = Some(num(&v, "c_override")?);
        }
        if let Some(stray) = fields.keys().next() {
            return Err(CliError::Config(format!("unknown config key {stray:?}")));
        }
        config.params = params;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config_with_sections() {
        let text = "\
# experiment
space = kind=lp p=4 n=2
suite = curvature
seed = 42

[suite]
trials = 1000
delta = 0.1

[output]
out = report.json
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.suite, SuiteName::Curvature);
        assert_eq!(c.seed, 42);
        assert_eq!(c.params.trials, 1000);
        assert!((c.params.delta - 0.1).abs() < 1e-15);
        assert_eq!(c.out.as_deref().unwrap().to_str().unwrap(), "report.json");
    }

    #[test]
    fn parses_json_config() {
        let text = r#"{"space": "kind=cone theta=4.0", "suite": "dimension", "seed": 7}"#;
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.suite, SuiteName::Dimension);
        assert_eq!(c.space, "kind=cone theta=4.0");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("suite = curvature\n").is_err());
        assert!(ExperimentConfig::parse("space = kind=lp p=4 n=2\n").is_err());
        assert!(ExperimentConfig::parse("space = kind=lp p=4 n=2\nsuite = nonsense\n").is_err());
        assert!(
            ExperimentConfig::parse("space = kind=lp p=4 n=2\nsuite = curvature\nbogus = 1\n")
                .is_err()
        );
        assert!(ExperimentConfig::parse("space = kind=torus r=2\nsuite = curvature\n").is_err());
    }
}
