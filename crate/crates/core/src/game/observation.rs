use serde::{Deserialize, Serialize};

use super::{slot_col, Action, ActionRecord, Card, CardMultiset, GameConfig};

/// Binary per-slot feasibility matrix: `n_slots` rows by `n_cols` columns
/// (card types plus null). Slot `p * hand_size + s` is player `p`'s slot `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HintMask {
    n_cols: usize,
    bits: Vec<bool>,
}

impl HintMask {
    pub fn new(n_slots: usize, n_cols: usize) -> Self {
        HintMask {
            n_cols,
            bits: vec![false; n_slots * n_cols],
        }
    }

    pub fn n_slots(&self) -> usize {
        self.bits.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, slot: usize, col: usize) -> bool {
        self.bits[slot * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, slot: usize, col: usize, value: bool) {
        self.bits[slot * self.n_cols + col] = value;
    }

    pub fn row(&self, slot: usize) -> &[bool] {
        &self.bits[slot * self.n_cols..(slot + 1) * self.n_cols]
    }

    /// Row for a freshly drawn card: every card type possible, null excluded.
    pub fn reset_occupied(&mut self, slot: usize) {
        let n = self.n_cols;
        let row = &mut self.bits[slot * n..(slot + 1) * n];
        row.fill(true);
        row[n - 1] = false;
    }

    /// Row for a slot that could not be refilled: only null.
    pub fn reset_empty(&mut self, slot: usize) {
        let n = self.n_cols;
        let row = &mut self.bits[slot * n..(slot + 1) * n];
        row.fill(false);
        row[n - 1] = true;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }
}

/// What one agent sees privately: every other hand, in seat order starting
/// from the agent's left (`observer + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrivateObservation {
    pub observer: usize,
    pub hand_size: usize,
    pub slots: Vec<Option<Card>>,
}

impl PrivateObservation {
    /// Absolute seat of the `k`-th observed hand.
    pub fn seat(&self, k: usize, n_players: usize) -> usize {
        (self.observer + k + 1) % n_players
    }

    pub fn hand(&self, k: usize) -> &[Option<Card>] {
        &self.slots[k * self.hand_size..(k + 1) * self.hand_size]
    }

    /// Canonical encoding: one column index per visible slot.
    pub fn encode(&self, config: &GameConfig) -> Vec<u16> {
        self.slots
            .iter()
            .map(|&c| slot_col(c, config) as u16)
            .collect()
    }
}

/// Absolute slot indices visible to `observer`, in the order used by
/// [`PrivateObservation`].
pub fn observed_slots(config: &GameConfig, observer: usize) -> Vec<usize> {
    (1..config.n_players)
        .flat_map(|k| {
            let p = (observer + k) % config.n_players;
            (0..config.hand_size).map(move |s| p * config.hand_size + s)
        })
        .collect()
}

/// Legal-action mask for the acting agent, computed only from public facts
/// and the actor's private view. `view` is a [`PrivateObservation::encode`]
/// encoding (which may be counterfactual).
pub fn legal_action_mask(
    config: &GameConfig,
    hint_tokens: u8,
    own_occupied: &[bool],
    view: &[u16],
) -> Vec<bool> {
    let h = config.hand_size;
    let mut mask = vec![false; config.n_actions()];
    let can_discard = config.allow_discard_at_max_hints || hint_tokens < config.max_hint_tokens;
    for (s, &occupied) in own_occupied.iter().enumerate() {
        if occupied {
            mask[s] = true;
            mask[h + s] = can_discard;
        }
    }
    if hint_tokens > 0 {
        let per_target = config.n_color + config.n_rank;
        let null = config.null_col() as u16;
        for k in 0..config.n_players - 1 {
            let base = 2 * h + k * per_target;
            for &col in &view[k * h..(k + 1) * h] {
                if col == null {
                    continue;
                }
                let card = Card::from_index(col as usize, config);
                mask[base + card.color as usize] = true;
                mask[base + config.n_color + card.rank as usize - 1] = true;
            }
        }
    }
    mask
}

/// Common-knowledge view of the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicFeatures {
    /// Fresh composition minus played and discarded cards. Hands are not
    /// subtracted since they are not public.
    pub candidates: CardMultiset,
    pub hint_mask: HintMask,
    pub hint_tokens: u8,
    pub life_tokens: u8,
    pub fireworks: Vec<u8>,
    pub discards: CardMultiset,
    pub last_action: Option<ActionRecord>,
    pub deck_size: usize,
    pub current_player: usize,
    pub turn: usize,
    /// Occupancy of every slot; public because draws are public.
    pub occupied: Vec<bool>,
}

impl PublicFeatures {
    pub fn own_occupied<'a>(&'a self, config: &GameConfig, agent: usize) -> &'a [bool] {
        &self.occupied[agent * config.hand_size..(agent + 1) * config.hand_size]
    }
}

/// Mask as a list of actions.
pub fn mask_to_actions(mask: &[bool], config: &GameConfig, actor: usize) -> Vec<Action> {
    mask.iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(i, _)| Action::from_index(i, config, actor))
        .collect()
}
