use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stap_core::experiments::{Axis, ExperimentParams, RunOptions, Scenario, SweepParam};

use crate::CliError;

/// A grid axis as `name:start:end:points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub param: String,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl FromStr for AxisConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Validation(format!("axis `{s}` must look like name:start:end:points"));
        let parts: Vec<&str> = s.split(':').collect();
        let [param, start, end, points] = parts[..] else {
            return Err(bad());
        };
        Ok(Self {
            param: param.to_string(),
            start: start.parse().map_err(|_| bad())?,
            end: end.parse().map_err(|_| bad())?,
            points: points.parse().map_err(|_| bad())?,
        })
    }
}

impl AxisConfig {
    pub fn sweep_axis(&self) -> Result<Axis, CliError> {
        let param: SweepParam = self.param.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
        let a = Axis::new(param, self.start, self.end, self.points);
        a.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(a)
    }

    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points < 2 || !(self.start.is_finite() && self.end.is_finite()) {
            return Err(CliError::Validation(format!(
                "axis `{}` needs a finite range and at least 2 points",
                self.param
            )));
        }
        Ok(Axis::new(SweepParam::Delta, self.start, self.end, self.points).values())
    }
}

/// Everything a run reads: scenario, parameters, grids and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default)]
    pub axis1: Option<AxisConfig>,
    #[serde(default)]
    pub axis2: Option<AxisConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::StapClosed,
            params: ExperimentParams::default(),
            axis1: None,
            axis2: None,
            output_dir: default_output_dir(),
            name: None,
            steps: None,
            tolerance: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            steps: self.steps,
            tolerance: self.tolerance,
        }
    }

    pub fn name_or(&self, default: &str) -> String {
        self.name.clone().unwrap_or_else(|| default.to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params
            .validate(self.scenario)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if self.steps == Some(0) {
            return Err(CliError::Validation("steps must be positive".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Validation("tolerance must be positive".into()));
            }
        }
        if let Some(n) = &self.name {
            if n.is_empty() || n.contains(['/', '\\']) {
                return Err(CliError::Validation(format!("invalid output name `{n}`")));
            }
        }
        Ok(())
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<(), CliError> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("output directory {}: {e}", dir.display())))?;
        let meta = fs::metadata(dir)
            .map_err(|e| CliError::Validation(format!("output directory {}: {e}", dir.display())))?;
        if meta.permissions().readonly() {
            return Err(CliError::Validation(format!(
                "output directory {} is not writable",
                dir.display()
            )));
        }
        Ok(())
    }
}
