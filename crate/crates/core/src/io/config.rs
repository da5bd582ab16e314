//! TOML run configuration. Unknown keys are rejected everywhere.
//!
//! ```toml
//! model = 1
//! seed = 20240601
//! out = "results"
//!
//! [fit]
//! data = "data.csv"
//! univariate = false
//!
//! [simulate]
//! n = 500
//! waves = 10
//! knots = [4.5, 4.5]
//! theta = 1.0
//! scenario = "medium"
//!
//! [mc]
//! reps = 200
//! [[mc.conditions]]
//! n = 200
//! waves = 6
//! knots = [2.5, 2.5]
//! theta = 2.0
//! scenario = "zero"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitOptions;
use crate::simulation::{ConditionSpec, Scenario, Shape};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<u8>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fit: Option<FitSection>,
    pub simulate: Option<Design>,
    pub mc: Option<McSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Resolved against the configuration file's directory when relative.
    pub data: PathBuf,
    #[serde(default)]
    pub univariate: bool,
    #[serde(default)]
    pub options: FitOptions,
}

/// Population and design of one simulated condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    pub n: usize,
    pub waves: usize,
    pub knots: Vec<f64>,
    pub theta: f64,
    #[serde(default = "default_corr")]
    pub residual_correlation: f64,
    pub scenario: Scenario,
    #[serde(default = "default_shape")]
    pub shape: Shape,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub temporal_order: bool,
}

fn default_corr() -> f64 {
    0.3
}
fn default_shape() -> Shape {
    Shape::Deceleration
}
fn default_jitter() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    #[default]
    Mle,
    /// Returns the generating values; for smoke-testing the harness.
    Truth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Defaults to twice `reps`.
    #[serde(default)]
    pub max_attempts: Option<usize>,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub options: FitOptions,
    pub conditions: Vec<Design>,
}

fn default_reps() -> usize {
    200
}

impl Design {
    pub fn to_condition(&self, model: u8, reps: usize, seed: u64, max_attempts: Option<usize>) -> ConditionSpec {
        ConditionSpec {
            model,
            n: self.n,
            waves: self.waves,
            knots: self.knots.clone(),
            theta: self.theta,
            residual_correlation: self.residual_correlation,
            scenario: self.scenario,
            shape: self.shape,
            reps,
            seed,
            jitter: self.jitter,
            max_attempts,
            temporal_order: self.temporal_order,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a configuration and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(out) = cfg.out.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        if let Some(fit) = cfg.fit.as_mut() {
            if fit.data.is_relative() {
                fit.data = base.join(&fit.data);
            }
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<u8> {
        match self.model {
            Some(m @ (1 | 2)) => Ok(m),
            Some(m) => Err(Error::Config(format!("model must be 1 or 2, got {m}"))),
            None => Err(Error::Config("model is not set".into())),
        }
    }

    /// Seed of the run; 0 when not configured. Always recorded in outputs.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = "model = 1\nseed = 7\n[simulate]\nn = 10\nwaves = 6\nknots = [2.5, 2.5]\ntheta = 1.0\nscenario = \"medium\"\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.model().unwrap(), 1);
        let d = cfg.simulate.unwrap();
        assert_eq!(d.residual_correlation, 0.3);
        assert_eq!(d.shape, Shape::Deceleration);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::parse("model = 1\ncolour = \"red\"\n").is_err());
        let nested = "[fit]\ndata = \"d.csv\"\n[fit.options]\nmax_start = 3\n";
        assert!(RunConfig::parse(nested).is_err());
    }
}
