use serde::{Deserialize, Serialize};

use crate::belief::FactorisedBelief;
use crate::game::{observed_slots, GameConfig, PublicFeatures};

/// Which belief rows an agent is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefVariant {
    V0,
    V1,
    V2,
}

impl BeliefVariant {
    /// Only V2 depends on the likelihood table, so only V2 agents need hand
    /// sampling during play.
    pub fn needs_likelihood(self) -> bool {
        self == BeliefVariant::V2
    }
}

impl std::str::FromStr for BeliefVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "v0" => Ok(BeliefVariant::V0),
            "v1" => Ok(BeliefVariant::V1),
            "v2" => Ok(BeliefVariant::V2),
            other => Err(format!("unknown belief variant {other:?} (expected v0, v1 or v2)")),
        }
    }
}

impl std::fmt::Display for BeliefVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BeliefVariant::V0 => "v0",
            BeliefVariant::V1 => "v1",
            BeliefVariant::V2 => "v2",
        })
    }
}

/// Turns are scaled by this before entering the network.
const TURN_SCALE: f64 = 100.0;

/// Field offsets of the dense public input for one game configuration. All
/// per-player blocks are rotated so the encoding agent comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicLayout {
    pub fireworks: usize,
    pub hint_tokens: usize,
    pub life_tokens: usize,
    pub discards: usize,
    pub hint_mask: usize,
    pub belief: usize,
    pub last_actor: usize,
    pub last_action: usize,
    pub last_hinted: usize,
    pub last_card: usize,
    pub last_misplay: usize,
    pub deck_fraction: usize,
    pub turn: usize,
    pub acting: usize,
    pub len: usize,
}

impl PublicLayout {
    pub fn new(c: &GameConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let start = at;
            at += n;
            start
        };
        let fireworks = take(c.n_color * c.n_rank);
        let hint_tokens = take(c.max_hint_tokens as usize);
        let life_tokens = take(c.max_life_tokens as usize);
        let discards = take(c.n_types());
        let hint_mask = take(c.n_slots() * c.n_cols());
        let belief = take(c.n_slots() * c.n_cols());
        let last_actor = take(c.n_players);
        let last_action = take(c.n_actions());
        let last_hinted = take(c.hand_size);
        let last_card = take(c.n_types());
        let last_misplay = take(1);
        let deck_fraction = take(1);
        let turn = take(1);
        let acting = take(1);
        PublicLayout {
            fireworks,
            hint_tokens,
            life_tokens,
            discards,
            hint_mask,
            belief,
            last_actor,
            last_action,
            last_hinted,
            last_card,
            last_misplay,
            deck_fraction,
            turn,
            acting,
            len: at,
        }
    }
}

/// Number of one-hot features describing the private view (other hands).
pub fn private_width(c: &GameConfig) -> usize {
    (c.n_players - 1) * c.hand_size * c.n_cols()
}

/// Number of one-hot features describing the agent's own hand (baseline only).
pub fn own_width(c: &GameConfig) -> usize {
    c.hand_size * c.n_cols()
}

/// Sparse indices for a private view (one column index per observed slot).
pub fn private_active(view: &[u16], n_cols: usize) -> Vec<usize> {
    view.iter()
        .enumerate()
        .map(|(k, &col)| k * n_cols + col as usize)
        .collect()
}

/// Sparse indices for the agent's own hand, placed after the private block.
pub fn own_active(own: &[u16], c: &GameConfig) -> Vec<usize> {
    let base = private_width(c);
    own.iter()
        .enumerate()
        .map(|(s, &col)| base + s * c.n_cols() + col as usize)
        .collect()
}

/// Dense public input for `agent`.
pub fn encode_public(
    c: &GameConfig,
    layout: &PublicLayout,
    f: &PublicFeatures,
    belief: &FactorisedBelief,
    agent: usize,
) -> Vec<f64> {
    let mut x = vec![0.0; layout.len];
    for (col, &h) in f.fireworks.iter().enumerate() {
        for r in 0..h as usize {
            x[layout.fireworks + col * c.n_rank + r] = 1.0;
        }
    }
    for i in 0..f.hint_tokens as usize {
        x[layout.hint_tokens + i] = 1.0;
    }
    for i in 0..f.life_tokens as usize {
        x[layout.life_tokens + i] = 1.0;
    }
    for t in 0..c.n_types() {
        let copies = c.copies_of_rank(t % c.n_rank + 1);
        x[layout.discards + t] = f64::from(f.discards.get(t)) / f64::from(copies);
    }
    let n_cols = c.n_cols();
    let rotated = std::iter::once(agent * c.hand_size..(agent + 1) * c.hand_size)
        .flat_map(|r| r.collect::<Vec<_>>())
        .chain(observed_slots(c, agent));
    for (k, slot) in rotated.enumerate() {
        let base = k * n_cols;
        for (col, &bit) in f.hint_mask.row(slot).iter().enumerate() {
            if bit {
                x[layout.hint_mask + base + col] = 1.0;
            }
        }
        x[layout.belief + base..layout.belief + base + n_cols].copy_from_slice(belief.row(slot));
    }
    if let Some(rec) = &f.last_action {
        let rel = (rec.player + c.n_players - agent) % c.n_players;
        x[layout.last_actor + rel] = 1.0;
        x[layout.last_action + rec.action.index(c, rec.player)] = 1.0;
        for s in 0..c.hand_size {
            if rec.hinted_slots >> s & 1 == 1 {
                x[layout.last_hinted + s] = 1.0;
            }
        }
        if let Some(card) = rec.card {
            x[layout.last_card + card.index(c)] = 1.0;
        }
        if rec.success == Some(false) {
            x[layout.last_misplay] = 1.0;
        }
    }
    let undealt = c.deck_size() - c.n_players * c.hand_size;
    x[layout.deck_fraction] = if undealt == 0 {
        0.0
    } else {
        f.deck_size as f64 / undealt as f64
    };
    x[layout.turn] = f.turn as f64 / TURN_SCALE;
    x[layout.acting] = if f.current_player == agent { 1.0 } else { 0.0 };
    x
}
