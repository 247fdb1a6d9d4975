use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use investsim::algorithms::by_id;
use investsim::learners::LearnerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    /// Standard errors of slack in Monte-Carlo checks.
    #[serde(default = "Tolerance::default_sigma")]
    pub sigma: f64,
    /// Absolute tolerance for exact comparisons.
    #[serde(default = "Tolerance::default_exact")]
    pub exact: f64,
}

impl Tolerance {
    fn default_sigma() -> f64 {
        investsim::dynamic::SIGMA_MARGIN
    }
    fn default_exact() -> f64 {
        investsim::WELFARE_TOL
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            sigma: Self::default_sigma(),
            exact: Self::default_exact(),
        }
    }
}

/// One experiment: an instance (by scenario id or file), an algorithm, a
/// learner, and how many runs to average.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `table1`, `prop1`, `random` or `greedy_gap`.
    #[serde(default)]
    pub scenario: Option<String>,
    /// Dynamic instance JSON, relative to the config file.
    #[serde(default)]
    pub instance_file: Option<PathBuf>,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_learner")]
    pub learner: String,
    /// Horizon; taken from the instance file when omitted there.
    #[serde(default, rename = "T")]
    pub horizon: Option<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub arms: Option<usize>,
    #[serde(default)]
    pub tolerance: Tolerance,
}

fn default_algorithm() -> String {
    "smart_greedy".into()
}

fn default_learner() -> String {
    "exp3".into()
}

fn default_runs() -> usize {
    investsim::dynamic::DEFAULT_RUNS
}

fn default_beta() -> f64 {
    0.5
}

pub const SCENARIOS: &[&str] = &["table1", "prop1", "random", "greedy_gap"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(f) = &cfg.instance_file {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.instance_file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scenario, &self.instance_file) {
            (Some(_), Some(_)) => bail!("field `scenario`: give either a scenario or an instance_file, not both"),
            (None, None) => bail!("field `scenario`: a scenario or an instance_file is required"),
            (Some(s), None) if !SCENARIOS.contains(&s.as_str()) => {
                bail!("field `scenario`: unknown scenario {s:?}; expected one of {SCENARIOS:?}")
            }
            _ => {}
        }
        by_id(&self.algorithm).context("field `algorithm`")?;
        self.learner_spec()?;
        if self.horizon == Some(0) {
            bail!("field `T`: horizon must be at least 1");
        }
        if self.runs == 0 {
            bail!("field `runs`: at least one run is required");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            bail!("field `beta`: {} is outside [0, 1]", self.beta);
        }
        if self.tolerance.sigma < 0.0 || self.tolerance.exact < 0.0 {
            bail!("field `tolerance`: tolerances must be nonnegative");
        }
        Ok(())
    }

    pub fn learner_spec(&self) -> Result<LearnerSpec> {
        self.learner.parse().context("field `learner`")
    }
}
