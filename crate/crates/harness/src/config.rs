//! Experiment configuration and result records.
//!
//! Configurations can be loaded from a flat key-value text file and
//! overridden by command-line flags. The grammar is one `key = value`
//! pair per line; blank lines and lines starting with `#` are ignored.
//! Recognized keys:
//!
//! ```text
//! scenario  = <string>        # which experiment to run
//! trials    = <u64>           # Monte-Carlo trials (> 0)
//! seed      = <u64>           # master seed
//! out       = <path>          # optional CSV output
//! json      = <path>          # optional JSON output
//! tolerance = <f64>           # SE multiplier for checks (default 3)
//! <name>    = <f64>           # any other key: numeric parameter
//! ```

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

use feedbacklab::{Error, Result};

fn default_tolerance() -> f64 {
    3.0
}

/// A fully specified experiment: scenario id, numeric parameters,
/// Monte-Carlo size, master seed, and output destinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Numeric parameters (powers, eps, blocklength, ...); keys are
    /// scenario-specific, ordered for stable serialization.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Standard-error multiplier used by every statistical check.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ExperimentConfig {
    pub fn new(scenario: impl Into<String>, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            scenario: scenario.into(),
            params: BTreeMap::new(),
            trials,
            seed,
            out: None,
            json: None,
            tolerance: default_tolerance(),
        }
    }

    /// Parses the flat key-value grammar documented at module level.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::new("", 0, 0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("config line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override (CLI flags go through here so
    /// file and flags share one grammar).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Parameter(format!("config key {key}: invalid {what}"));
        match key {
            "scenario" => self.scenario = value.to_string(),
            "trials" => self.trials = value.parse().map_err(|_| bad("u64"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("u64"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "json" => self.json = Some(PathBuf::from(value)),
            "tolerance" => self.tolerance = value.parse().map_err(|_| bad("f64"))?,
            other => {
                let v: f64 = value.parse().map_err(|_| bad("f64"))?;
                self.params.insert(other.to_string(), v);
            }
        }
        Ok(())
    }

    /// Validates the invariants every scenario relies on.
    pub fn validate(&self) -> Result<()> {
        if self.scenario.is_empty() {
            return Err(Error::Parameter("config needs a scenario id".into()));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Fetches a required numeric parameter.
    pub fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("missing parameter `{key}`")))
    }

    /// Fetches an optional numeric parameter with a default.
    pub fn param_or(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }
}

/// One named pass/fail verdict inside a [`ResultRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The serialized outcome of one experiment run. `metrics` are
/// deterministic given the config; `wall_time_secs` is informational
/// and excluded from equality comparisons between runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    /// Echo of the numeric parameters the run actually used.
    pub params: BTreeMap<String, f64>,
    pub trials: u64,
    pub seed: u64,
    /// Named scalar metrics (estimates, bounds, counts).
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<CheckOutcome>,
    pub wall_time_secs: f64,
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        ResultRecord {
            scenario: config.scenario.clone(),
            params: config.params.clone(),
            trials: config.trials,
            seed: config.seed,
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            wall_time_secs: 0.0,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Deterministic payload comparison (everything but wall time).
    pub fn same_outcome(&self, other: &ResultRecord) -> bool {
        self.scenario == other.scenario
            && self.params == other.params
            && self.trials == other.trials
            && self.seed == other.seed
            && self.metrics == other.metrics
            && self.checks == other.checks
    }
}
