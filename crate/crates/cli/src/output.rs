use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.{}.tmp", std::process::id()));
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

fn fmt_num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub expected: String,
}

impl Check {
    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= tol,
            value,
            expected: format!("{target} ± {}", fmt_num(tol)),
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            passed: (lo..=hi).contains(&value),
            value,
            expected: format!("[{lo}, {hi}]"),
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= bound,
            value,
            expected: format!(">= {}", fmt_num(bound)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict<P: Serialize> {
    pub scenario: String,
    pub passed: bool,
    pub parameters: P,
    pub checks: Vec<Check>,
}

impl<P: Serialize> Verdict<P> {
    pub fn new(scenario: &str, parameters: P, checks: Vec<Check>) -> Self {
        Self {
            scenario: scenario.into(),
            passed: checks.iter().all(|c| c.passed),
            parameters,
            checks,
        }
    }

    pub fn print(&self) {
        for c in &self.checks {
            println!(
                "{} {}: {} (expected {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.expected
            );
        }
        println!("{}: {}", self.scenario, if self.passed { "PASS" } else { "FAIL" });
    }
}
