//! The JSON run document read by the command-line tool.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefConfig;
use crate::checkpoint::config_hash;
use crate::game::GameConfig;
use crate::learner::{LearnerError, MatrixConfig, TrainConfig};
use crate::pubmdp::BeliefVariant;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Environment steps (Hanabi) for the whole population.
    pub total_steps: u64,
    /// Environment steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    /// Updates between metrics rows.
    pub log_every: u64,
    pub eval_games: usize,
    pub eval_inv_temp: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            total_steps: 20_000_000,
            checkpoint_every: 1_000_000,
            log_every: 10,
            eval_games: 10_000,
            eval_inv_temp: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub game: GameConfig,
    pub belief: BeliefConfig,
    pub train: TrainConfig,
    pub run: RunSection,
    pub matrix: MatrixConfig,
}

/// The parts of a run that fix a Hanabi network's meaning: checkpoints are
/// refused when these differ.
#[derive(Serialize)]
struct ModelIdentity<'a> {
    game: &'a GameConfig,
    hidden: &'a [usize],
    belief_input: BeliefVariant,
}

impl RunConfig {
    pub fn from_json(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let learner = |e: LearnerError| ConfigError::Invalid(e.to_string());
        self.train.validate().map_err(learner)?;
        self.matrix.validate().map_err(learner)?;
        self.belief.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.run.log_every == 0 {
            return Err(ConfigError::Invalid("run.log_every must be at least 1".into()));
        }
        if !(self.run.eval_inv_temp > 0.0) {
            return Err(ConfigError::Invalid("run.eval_inv_temp must be positive".into()));
        }
        Ok(())
    }

    /// Pretty JSON with every default filled in.
    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn hanabi_model_hash(&self) -> String {
        config_hash(&ModelIdentity {
            game: &self.game,
            hidden: &self.train.hidden,
            belief_input: self.train.belief_input,
        })
    }

    /// Matrix checkpoints depend only on the hidden layers.
    pub fn matrix_model_hash(&self) -> String {
        config_hash(&("matrix", &self.train.hidden))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}", "x").unwrap();
        assert_eq!(c, RunConfig::default());
        let back = RunConfig::from_json(&c.effective_json(), "x").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"run": {"seeed": 1}}"#, "x").is_err());
        assert!(RunConfig::from_json(r#"{"extra": 1}"#, "x").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"train": {"batch_size": 0}}"#, "x").is_err());
        assert!(RunConfig::from_json(r#"{"game": {"n_color": 0}}"#, "x").is_err());
        assert!(RunConfig::from_json(r#"{"run": {"eval_inv_temp": 0}}"#, "x").is_err());
    }

    #[test]
    fn model_hash_tracks_network_shape_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.run.seed = 9;
        b.train.learning_rate = 1.0;
        assert_eq!(a.hanabi_model_hash(), b.hanabi_model_hash());
        b.train.hidden = vec![8];
        assert_ne!(a.hanabi_model_hash(), b.hanabi_model_hash());
    }
}
