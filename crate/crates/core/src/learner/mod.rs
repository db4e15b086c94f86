//! Synchronous advantage actor-critic training for the matrix game and
//! Hanabi, with counterfactual gradients for the matrix game and an
//! optional copy-and-perturb population.

mod hanabi;
mod loss;
mod matrix;
mod pbt;
mod trajectory;

pub use hanabi::{
    best_member, hanabi_net_spec, init_population, play_episode, train_hanabi, AgentPolicy, Episode, EpisodeOptions,
    HanabiTrainOutcome, MetricsRow, TurnRecord, TRANSCRIPT_SCHEMA_VERSION,
};
pub use loss::{
    a2c_losses, advantages, baseline_forward, baseline_term, partial_policy_log_prob, policy_forward, policy_terms,
    LossStats, LossWeights,
};
pub use matrix::{
    evaluate_matrix, greedy_profile, matrix_episode, p1_table_values, train_matrix, MatrixAgents, MatrixConfig, MatrixEval,
    MatrixMethod, MatrixMetricsRow, MatrixTrainOutcome,
};
pub use pbt::{pbt_lite_evolve, EvolveEvent, Member};
pub use trajectory::{Branch, Step, Trajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::GameError;
use crate::optim::OptimizerConfig;
use crate::pubmdp::{BeliefVariant, PubMdpError};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("environment rejected an action during rollout: {0}")]
    Env(#[from] GameError),
    #[error(transparent)]
    PubMdp(#[from] PubMdpError),
    #[error("non-finite loss at update {update}: {stats:?}")]
    NonFinite { update: u64, stats: LossStats },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Episodes per gradient update.
    pub batch_size: usize,
    pub gamma: f64,
    pub baseline_weight: f64,
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerConfig,
    /// Global-norm gradient clip; `null` disables it.
    pub clip_norm: Option<f64>,
    /// Counterfactual partial-policy gradients (matrix game only).
    pub cf_gradients: bool,
    pub hidden: Vec<usize>,
    /// Inverse softmax temperature while training.
    pub inv_temp: f64,
    /// Rollout horizon; episodes are truncated and padded to it.
    pub max_steps: usize,
    /// Belief rows fed to the policy.
    pub belief_input: BeliefVariant,
    pub population_size: usize,
    /// Environment steps between population evolution checks.
    pub evolve_interval: u64,
    pub rating_ema: f64,
    pub pbt_threshold: f64,
    /// Fraction of the step budget before evolution starts.
    pub pbt_warmup_fraction: f64,
    /// Log-uniform ranges for the initial hyperparameters of members other
    /// than the first.
    pub learning_rate_range: [f64; 2],
    pub entropy_weight_range: [f64; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            gamma: 0.999,
            baseline_weight: 0.25,
            entropy_weight: 0.05,
            learning_rate: 2e-4,
            optimizer: OptimizerConfig::rmsprop(),
            clip_norm: Some(40.0),
            cf_gradients: false,
            hidden: vec![384, 384],
            inv_temp: 1.0,
            max_steps: 65,
            belief_input: BeliefVariant::V2,
            population_size: 4,
            evolve_interval: 200_000,
            rating_ema: 0.01,
            pbt_threshold: 0.5,
            pbt_warmup_fraction: 0.05,
            learning_rate_range: [9e-5, 3e-4],
            entropy_weight_range: [3e-2, 7e-2],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let fail = |m: &str| Err(LearnerError::InvalidConfig(m.to_owned()));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.inv_temp > 0.0) {
            return fail("learning_rate and inv_temp must be positive");
        }
        if !(self.baseline_weight >= 0.0) || !(self.entropy_weight >= 0.0) {
            return fail("loss weights must be non-negative");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return fail("clip_norm must be positive or null");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("hidden must list at least one positive layer width");
        }
        if self.max_steps == 0 || self.population_size == 0 || self.evolve_interval == 0 {
            return fail("max_steps, population_size and evolve_interval must be positive");
        }
        if !(0.0..=1.0).contains(&self.rating_ema) || !(0.0..=1.0).contains(&self.pbt_warmup_fraction) {
            return fail("rating_ema and pbt_warmup_fraction must lie in [0, 1]");
        }
        for r in [self.learning_rate_range, self.entropy_weight_range] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return fail("hyperparameter ranges must be positive and ordered");
            }
        }
        self.optimizer.validate().map_err(LearnerError::InvalidConfig)
    }

    pub fn loss_weights(&self, entropy_weight: f64) -> LossWeights {
        LossWeights {
            gamma: self.gamma,
            baseline_weight: self.baseline_weight,
            entropy_weight,
            counterfactual: self.cf_gradients,
        }
    }
}
