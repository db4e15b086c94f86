use serde::{Deserialize, Serialize};

use super::GameError;

/// Rule parameters for a Hanabi variant.
///
/// `hand_size` may be omitted in JSON; it then defaults to 5 for two or three
/// players and 4 for four or five. Deserialisation validates the result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGameConfig")]
pub struct GameConfig {
    pub n_color: usize,
    pub n_rank: usize,
    pub n_players: usize,
    pub hand_size: usize,
    pub max_hint_tokens: u8,
    pub max_life_tokens: u8,
    pub allow_discard_at_max_hints: bool,
    pub strict_scoring: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGameConfig {
    #[serde(default = "five")]
    n_color: usize,
    #[serde(default = "five")]
    n_rank: usize,
    #[serde(default = "two")]
    n_players: usize,
    #[serde(default)]
    hand_size: Option<usize>,
    #[serde(default = "eight")]
    max_hint_tokens: u8,
    #[serde(default = "three")]
    max_life_tokens: u8,
    #[serde(default = "yes")]
    allow_discard_at_max_hints: bool,
    #[serde(default)]
    strict_scoring: bool,
}

fn five() -> usize {
    5
}
fn two() -> usize {
    2
}
fn eight() -> u8 {
    8
}
fn three() -> u8 {
    3
}
fn yes() -> bool {
    true
}

impl TryFrom<RawGameConfig> for GameConfig {
    type Error = GameError;

    fn try_from(raw: RawGameConfig) -> Result<Self, Self::Error> {
        let config = GameConfig {
            n_color: raw.n_color,
            n_rank: raw.n_rank,
            n_players: raw.n_players,
            hand_size: raw
                .hand_size
                .unwrap_or_else(|| default_hand_size(raw.n_players)),
            max_hint_tokens: raw.max_hint_tokens,
            max_life_tokens: raw.max_life_tokens,
            allow_discard_at_max_hints: raw.allow_discard_at_max_hints,
            strict_scoring: raw.strict_scoring,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn default_hand_size(n_players: usize) -> usize {
    if n_players >= 4 {
        4
    } else {
        5
    }
}

impl Default for GameConfig {
    fn default() -> Self {
        Self::standard(2)
    }
}

impl GameConfig {
    /// Five colours, five ranks, default hand size for `n_players`.
    pub fn standard(n_players: usize) -> Self {
        GameConfig {
            n_color: 5,
            n_rank: 5,
            n_players,
            hand_size: default_hand_size(n_players),
            max_hint_tokens: 8,
            max_life_tokens: 3,
            allow_discard_at_max_hints: true,
            strict_scoring: false,
        }
    }

    /// Two-player variant with a reduced deck; everything else at defaults.
    pub fn small(n_color: usize, n_rank: usize, hand_size: usize) -> Self {
        GameConfig {
            n_color,
            n_rank,
            hand_size,
            ..Self::standard(2)
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let fail = |msg: String| Err(GameError::InvalidConfig(msg));
        if self.n_color == 0 {
            return fail("n_color must be at least 1".into());
        }
        if self.n_rank < 2 {
            return fail("n_rank must be at least 2".into());
        }
        if !(2..=5).contains(&self.n_players) {
            return fail(format!("n_players must be in [2, 5], got {}", self.n_players));
        }
        if self.hand_size == 0 {
            return fail("hand_size must be at least 1".into());
        }
        if self.hand_size > 16 {
            return fail("hand_size above 16 is not supported".into());
        }
        if self.n_color > 16 || self.n_rank > 16 {
            return fail("at most 16 colours and 16 ranks are supported".into());
        }
        if self.deck_size() < self.n_players * self.hand_size {
            return fail(format!(
                "deck of {} cards cannot deal {} hands of {}",
                self.deck_size(),
                self.n_players,
                self.hand_size
            ));
        }
        if self.max_hint_tokens == 0 || self.max_life_tokens == 0 {
            return fail("token maxima must be positive".into());
        }
        Ok(())
    }

    /// Copies of a card of `rank` (1-based) in a fresh deck.
    pub fn copies_of_rank(&self, rank: usize) -> u8 {
        if rank == 1 {
            3
        } else if rank == self.n_rank {
            1
        } else {
            2
        }
    }

    pub fn deck_size(&self) -> usize {
        2 * self.n_color * self.n_rank
    }

    /// Distinct card types, excluding the null column.
    pub fn n_types(&self) -> usize {
        self.n_color * self.n_rank
    }

    /// Belief/hint-mask columns: card types plus null.
    pub fn n_cols(&self) -> usize {
        self.n_types() + 1
    }

    pub fn null_col(&self) -> usize {
        self.n_types()
    }

    /// Total private slots across all hands.
    pub fn n_slots(&self) -> usize {
        self.n_players * self.hand_size
    }

    pub fn max_score(&self) -> usize {
        self.n_types()
    }

    /// Size of the per-agent action space, including the no-action.
    pub fn n_actions(&self) -> usize {
        2 * self.hand_size + (self.n_players - 1) * (self.n_color + self.n_rank) + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults_materialise_hand_size() {
        let c: GameConfig = serde_json::from_str(r#"{"n_players": 4}"#).unwrap();
        assert_eq!(c.hand_size, 4);
        let c: GameConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, GameConfig::standard(2));
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"hand_size\":5"));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(serde_json::from_str::<GameConfig>(r#"{"colours": 3}"#).is_err());
        assert!(serde_json::from_str::<GameConfig>(r#"{"n_rank": 1}"#).is_err());
        assert!(serde_json::from_str::<GameConfig>(r#"{"n_players": 6}"#).is_err());
        assert!(
            serde_json::from_str::<GameConfig>(r#"{"n_color": 1, "n_rank": 2, "hand_size": 3}"#)
                .is_err()
        );
    }

    #[test]
    fn standard_sizes() {
        let c = GameConfig::standard(2);
        assert_eq!(c.deck_size(), 50);
        assert_eq!(c.n_cols(), 26);
        assert_eq!(c.n_slots(), 10);
        assert_eq!(c.n_actions(), 21);
        let total: usize = (1..=5).map(|r| c.copies_of_rank(r) as usize).sum();
        assert_eq!(total * c.n_color, 50);
    }
}
