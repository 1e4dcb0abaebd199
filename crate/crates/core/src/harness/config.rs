use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::DecodingLoss;
use crate::learners::{ArowConfig, HingeConfig, LearnerConfig, TreeConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Hinge,
    Arow,
    Tree,
}

/// Flat key-value run settings, read from TOML. Every seed is explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub learner: LearnerKind,
    pub c: f64,
    pub epochs: usize,
    pub r: f64,
    pub early_stopping: bool,
    pub min_samples_split: usize,
    pub loss: DecodingLoss,
    pub repeats: usize,
    pub restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hinge = HingeConfig::default();
        let arow = ArowConfig::default();
        Self {
            seed: 0,
            learner: LearnerKind::Hinge,
            c: hinge.c,
            epochs: hinge.epochs,
            r: arow.r,
            early_stopping: false,
            min_samples_split: TreeConfig::default().min_samples_split,
            loss: DecodingLoss::Hinge,
            repeats: 5,
            restarts: 20,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn learner_config(&self) -> Result<LearnerConfig> {
        let cfg = match self.learner {
            LearnerKind::Hinge => LearnerConfig::Hinge(HingeConfig {
                c: self.c,
                epochs: self.epochs,
            }),
            LearnerKind::Arow => LearnerConfig::Arow(ArowConfig {
                r: self.r,
                epochs: self.epochs,
                early_stopping: self.early_stopping,
            }),
            LearnerKind::Tree => LearnerConfig::Tree(TreeConfig {
                min_samples_split: self.min_samples_split,
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = RunConfig::from_toml_str("seed = 9\nlearner = \"arow\"\nloss = \"exp\"\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.loss, DecodingLoss::Exponential);
        assert!(matches!(cfg.learner_config().unwrap(), LearnerConfig::Arow(a) if a.r == 1.0));
        assert!(RunConfig::from_toml_str("sede = 1").is_err());
    }
}
