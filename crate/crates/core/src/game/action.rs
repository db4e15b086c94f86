use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Card, GameConfig};

/// A move. Hint targets are absolute player indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Play { slot: usize },
    Discard { slot: usize },
    HintColor { target: usize, color: u8 },
    HintRank { target: usize, rank: u8 },
    NoAction,
}

impl Action {
    pub fn is_hint(&self) -> bool {
        matches!(self, Action::HintColor { .. } | Action::HintRank { .. })
    }

    /// Index into the actor-relative action space of size
    /// `config.n_actions()`. Hint targets are encoded by seat offset from the
    /// actor so that the same index means the same thing for every seat.
    pub fn index(&self, config: &GameConfig, actor: usize) -> usize {
        let h = config.hand_size;
        let per_target = config.n_color + config.n_rank;
        let offset = |target: usize| (target + config.n_players - actor) % config.n_players;
        match *self {
            Action::Play { slot } => slot,
            Action::Discard { slot } => h + slot,
            Action::HintColor { target, color } => {
                2 * h + (offset(target) - 1) * per_target + color as usize
            }
            Action::HintRank { target, rank } => {
                2 * h + (offset(target) - 1) * per_target + config.n_color + rank as usize - 1
            }
            Action::NoAction => config.n_actions() - 1,
        }
    }

    /// Inverse of [`Action::index`].
    pub fn from_index(index: usize, config: &GameConfig, actor: usize) -> Self {
        let h = config.hand_size;
        let per_target = config.n_color + config.n_rank;
        if index < h {
            Action::Play { slot: index }
        } else if index < 2 * h {
            Action::Discard { slot: index - h }
        } else if index + 1 < config.n_actions() {
            let rest = index - 2 * h;
            let target = (actor + rest / per_target + 1) % config.n_players;
            let within = rest % per_target;
            if within < config.n_color {
                Action::HintColor {
                    target,
                    color: within as u8,
                }
            } else {
                Action::HintRank {
                    target,
                    rank: (within - config.n_color + 1) as u8,
                }
            }
        } else {
            Action::NoAction
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Play { slot } => write!(f, "play {slot}"),
            Action::Discard { slot } => write!(f, "discard {slot}"),
            Action::HintColor { target, color } => write!(f, "hint p{target} colour {color}"),
            Action::HintRank { target, rank } => write!(f, "hint p{target} rank {rank}"),
            Action::NoAction => f.write_str("no-action"),
        }
    }
}

/// Public record of the most recent move.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    pub player: usize,
    pub action: Action,
    /// Card revealed by a play or discard.
    pub card: Option<Card>,
    /// Whether a play succeeded.
    pub success: Option<bool>,
    /// Bit `s` set iff a hint touched the target's slot `s`.
    pub hinted_slots: u32,
}
