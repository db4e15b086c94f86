//! Seed-reproducible Hanabi engine with split public and private views.

mod action;
mod card;
mod config;
mod count;
mod observation;
mod state;

pub use action::{Action, ActionRecord};
pub use card::{slot_col, Card, CardMultiset};
pub use config::{default_hand_size, GameConfig};
pub use count::{count_hand_pairs, count_joint_hands, count_ordered, JointHandCount};
pub use observation::{
    legal_action_mask, mask_to_actions, observed_slots, HintMask, PrivateObservation,
    PublicFeatures,
};
pub use state::{GameState, StepOutcome};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("game is over")]
    Terminal,
    #[error("player {player} cannot {action}: {reason}")]
    IllegalAction {
        action: Action,
        player: usize,
        reason: String,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[cfg(test)]
mod tests;
