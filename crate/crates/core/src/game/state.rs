use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::observation::{legal_action_mask, mask_to_actions, observed_slots};
use super::{
    Action, ActionRecord, Card, CardMultiset, GameConfig, GameError, HintMask, PrivateObservation,
    PublicFeatures,
};
use crate::rng::{mix, seeded_rng, stream};

/// Result of applying one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub reward: u32,
    pub terminal: bool,
    /// Absolute slot that was vacated by a play or discard (and refilled if
    /// the deck allowed).
    pub vacated_slot: Option<usize>,
}

/// Full Markov state of a game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    config: GameConfig,
    seed: u64,
    /// Undealt cards; the next card drawn is the last element.
    deck: Vec<Card>,
    hands: Vec<Vec<Option<Card>>>,
    fireworks: Vec<u8>,
    hint_tokens: u8,
    life_tokens: u8,
    discards: CardMultiset,
    hint_mask: HintMask,
    current_player: usize,
    last_action: Option<ActionRecord>,
    /// Turns left once the deck has run out.
    final_turns: Option<usize>,
    turn: usize,
    terminal: bool,
    /// Turn at which each slot was last filled.
    filled_at: Vec<usize>,
}

impl GameState {
    /// Shuffles a fresh deck with `seed` and deals round-robin by slot.
    pub fn new(config: GameConfig, seed: u64) -> Result<Self, GameError> {
        config.validate()?;
        let fresh = CardMultiset::full_deck(&config);
        let mut deck: Vec<Card> = (0..config.n_types())
            .flat_map(|i| std::iter::repeat(Card::from_index(i, &config)).take(fresh.get(i) as usize))
            .collect();
        deck.shuffle(&mut seeded_rng(mix(seed, stream::DEAL)));
        Ok(Self::with_deck(config, seed, deck))
    }

    /// Deals from a prearranged deck; `deck[0]` is dealt first. The deck must be
    /// a permutation of the fresh composition.
    pub fn from_ordered_deck(config: GameConfig, ordered: Vec<Card>) -> Result<Self, GameError> {
        config.validate()?;
        let mut census = CardMultiset::empty(&config);
        for &c in &ordered {
            if !c.is_valid(&config) {
                return Err(GameError::InvalidConfig(format!("card {c} outside the deck")));
            }
            census.add(c, &config);
        }
        if census != CardMultiset::full_deck(&config) {
            return Err(GameError::InvalidConfig(
                "stacked deck is not a permutation of the fresh deck".into(),
            ));
        }
        let mut deck = ordered;
        deck.reverse();
        Ok(Self::with_deck(config, 0, deck))
    }

    fn with_deck(config: GameConfig, seed: u64, deck: Vec<Card>) -> Self {
        let n_slots = config.n_slots();
        let mut state = GameState {
            hands: vec![vec![None; config.hand_size]; config.n_players],
            fireworks: vec![0; config.n_color],
            hint_tokens: config.max_hint_tokens,
            life_tokens: config.max_life_tokens,
            discards: CardMultiset::empty(&config),
            hint_mask: HintMask::new(n_slots, config.n_cols()),
            current_player: 0,
            last_action: None,
            final_turns: None,
            turn: 0,
            terminal: false,
            filled_at: vec![0; n_slots],
            deck,
            seed,
            config,
        };
        for s in 0..state.config.hand_size {
            for p in 0..state.config.n_players {
                state.draw_into(p, s);
            }
        }
        // Dealing can only exhaust the deck when it is exactly hand-sized.
        if state.deck.is_empty() {
            state.final_turns = Some(state.config.n_players);
        }
        state
    }

    fn draw_into(&mut self, player: usize, slot: usize) {
        let abs = player * self.config.hand_size + slot;
        match self.deck.pop() {
            Some(card) => {
                self.hands[player][slot] = Some(card);
                self.hint_mask.reset_occupied(abs);
                self.filled_at[abs] = self.turn;
            }
            None => {
                self.hands[player][slot] = None;
                self.hint_mask.reset_empty(abs);
            }
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn deck(&self) -> &[Card] {
        &self.deck
    }
    pub fn hands(&self) -> &[Vec<Option<Card>>] {
        &self.hands
    }
    pub fn hand(&self, player: usize) -> &[Option<Card>] {
        &self.hands[player]
    }
    pub fn fireworks(&self) -> &[u8] {
        &self.fireworks
    }
    pub fn hint_tokens(&self) -> u8 {
        self.hint_tokens
    }
    pub fn life_tokens(&self) -> u8 {
        self.life_tokens
    }
    pub fn discards(&self) -> &CardMultiset {
        &self.discards
    }
    pub fn hint_mask(&self) -> &HintMask {
        &self.hint_mask
    }
    pub fn current_player(&self) -> usize {
        self.current_player
    }
    pub fn last_action(&self) -> Option<&ActionRecord> {
        self.last_action.as_ref()
    }
    pub fn turn(&self) -> usize {
        self.turn
    }
    pub fn is_terminal(&self) -> bool {
        self.terminal
    }
    pub fn final_turns(&self) -> Option<usize> {
        self.final_turns
    }

    /// Card in absolute slot `abs`.
    pub fn slot_card(&self, abs: usize) -> Option<Card> {
        let h = self.config.hand_size;
        self.hands[abs / h][abs % h]
    }

    /// Every slot's true content in absolute order.
    pub fn true_slots(&self) -> Vec<Option<Card>> {
        self.hands.iter().flatten().copied().collect()
    }

    /// The most recently filled occupied slot of `player`, ties to the
    /// highest index.
    pub fn newest_slot(&self, player: usize) -> Option<usize> {
        let h = self.config.hand_size;
        (0..h)
            .filter(|&s| self.hands[player][s].is_some())
            .max_by_key(|&s| (self.filled_at[player * h + s], s))
    }

    /// Points scored. Under strict scoring a game that lost every life is
    /// worth 0.
    pub fn score(&self) -> u32 {
        if self.config.strict_scoring && self.life_tokens == 0 {
            0
        } else {
            self.raw_score()
        }
    }

    /// Sum of firework heights regardless of scoring mode.
    pub fn raw_score(&self) -> u32 {
        self.fireworks.iter().map(|&h| h as u32).sum()
    }

    fn own_occupied(&self, player: usize) -> Vec<bool> {
        self.hands[player].iter().map(Option::is_some).collect()
    }

    /// Legal-action mask (actor-relative indices) for `agent`.
    pub fn legal_mask(&self, agent: usize) -> Result<Vec<bool>, GameError> {
        if self.terminal {
            return Err(GameError::Terminal);
        }
        if agent != self.current_player {
            let mut mask = vec![false; self.config.n_actions()];
            mask[self.config.n_actions() - 1] = true;
            return Ok(mask);
        }
        let view = self.private_observation(agent).encode(&self.config);
        Ok(legal_action_mask(
            &self.config,
            self.hint_tokens,
            &self.own_occupied(agent),
            &view,
        ))
    }

    /// Legal actions for `agent`. Non-acting agents may only take the no-action.
    pub fn legal_actions(&self, agent: usize) -> Result<Vec<Action>, GameError> {
        Ok(mask_to_actions(&self.legal_mask(agent)?, &self.config, agent))
    }

    fn reject(&self, action: Action, reason: &str) -> GameError {
        GameError::IllegalAction {
            action,
            player: self.current_player,
            reason: reason.to_owned(),
        }
    }

    fn check_legal(&self, action: Action) -> Result<(), GameError> {
        let c = &self.config;
        let actor = self.current_player;
        match action {
            Action::NoAction => Err(self.reject(action, "the acting player must move")),
            Action::Play { slot } | Action::Discard { slot } => {
                if slot >= c.hand_size || self.hands[actor][slot].is_none() {
                    return Err(self.reject(action, "slot is empty or out of range"));
                }
                if matches!(action, Action::Discard { .. })
                    && !c.allow_discard_at_max_hints
                    && self.hint_tokens == c.max_hint_tokens
                {
                    return Err(self.reject(action, "discarding at maximum hint tokens"));
                }
                Ok(())
            }
            Action::HintColor { target, .. } | Action::HintRank { target, .. } => {
                if target >= c.n_players || target == actor {
                    return Err(self.reject(action, "invalid hint target"));
                }
                if self.hint_tokens == 0 {
                    return Err(self.reject(action, "no hint tokens"));
                }
                let touches = self.hands[target].iter().flatten().any(|card| match action {
                    Action::HintColor { color, .. } => card.color == color,
                    Action::HintRank { rank, .. } => card.rank == rank,
                    _ => unreachable!(),
                });
                if !touches {
                    return Err(self.reject(action, "empty hint"));
                }
                Ok(())
            }
        }
    }

    /// Applies the acting player's move. Illegal moves are rejected and leave
    /// the state untouched.
    pub fn apply(&mut self, action: Action) -> Result<StepOutcome, GameError> {
        if self.terminal {
            return Err(GameError::Terminal);
        }
        self.check_legal(action)?;
        let c = self.config.clone();
        let actor = self.current_player;
        let in_final_round = self.final_turns.is_some();
        let mut reward = 0;
        let mut record = ActionRecord {
            player: actor,
            action,
            card: None,
            success: None,
            hinted_slots: 0,
        };
        let mut vacated_slot = None;

        match action {
            Action::Play { slot } => {
                let card = self.hands[actor][slot].take().expect("checked occupied");
                record.card = Some(card);
                let height = &mut self.fireworks[card.color as usize];
                if *height + 1 == card.rank {
                    *height += 1;
                    reward = 1;
                    record.success = Some(true);
                    if card.rank as usize == c.n_rank && self.hint_tokens < c.max_hint_tokens {
                        self.hint_tokens += 1;
                    }
                } else {
                    self.life_tokens -= 1;
                    self.discards.add(card, &c);
                    record.success = Some(false);
                }
                vacated_slot = Some(actor * c.hand_size + slot);
                self.refill(actor, slot);
            }
            Action::Discard { slot } => {
                let card = self.hands[actor][slot].take().expect("checked occupied");
                record.card = Some(card);
                self.discards.add(card, &c);
                if self.hint_tokens < c.max_hint_tokens {
                    self.hint_tokens += 1;
                }
                vacated_slot = Some(actor * c.hand_size + slot);
                self.refill(actor, slot);
            }
            Action::HintColor { target, .. } | Action::HintRank { target, .. } => {
                self.hint_tokens -= 1;
                for s in 0..c.hand_size {
                    let Some(card) = self.hands[target][s] else { continue };
                    let abs = target * c.hand_size + s;
                    let matches = match action {
                        Action::HintColor { color, .. } => card.color == color,
                        Action::HintRank { rank, .. } => card.rank == rank,
                        _ => unreachable!(),
                    };
                    if matches {
                        record.hinted_slots |= 1 << s;
                    }
                    for col in 0..c.n_types() {
                        let other = Card::from_index(col, &c);
                        let same = match action {
                            Action::HintColor { color, .. } => other.color == color,
                            Action::HintRank { rank, .. } => other.rank == rank,
                            _ => unreachable!(),
                        };
                        if same != matches {
                            self.hint_mask.set(abs, col, false);
                        }
                    }
                }
            }
            Action::NoAction => unreachable!("rejected by check_legal"),
        }

        self.last_action = Some(record);
        self.turn += 1;
        if in_final_round {
            let left = self.final_turns.expect("final round") - 1;
            self.final_turns = Some(left);
            if left == 0 {
                self.terminal = true;
            }
        }
        if self.life_tokens == 0 || self.raw_score() as usize == c.max_score() {
            self.terminal = true;
        }
        self.current_player = (actor + 1) % c.n_players;
        Ok(StepOutcome {
            reward,
            terminal: self.terminal,
            vacated_slot,
        })
    }

    fn refill(&mut self, player: usize, slot: usize) {
        let had_cards = !self.deck.is_empty();
        self.draw_into(player, slot);
        if had_cards && self.deck.is_empty() && self.final_turns.is_none() {
            // Everyone, the drawer included, gets one more turn.
            self.final_turns = Some(self.config.n_players);
        }
    }

    /// Cards not publicly accounted for: fresh deck minus fireworks and discards.
    pub fn candidates(&self) -> CardMultiset {
        let c = &self.config;
        let mut counts = CardMultiset::full_deck(c).counts().to_vec();
        for (color, &height) in self.fireworks.iter().enumerate() {
            for rank in 1..=height {
                counts[Card::new(color as u8, rank).index(c)] -= 1;
            }
        }
        for (i, &d) in self.discards.counts().iter().enumerate() {
            counts[i] -= d;
        }
        CardMultiset::from_counts(counts)
    }

    pub fn public_features(&self) -> PublicFeatures {
        PublicFeatures {
            candidates: self.candidates(),
            hint_mask: self.hint_mask.clone(),
            hint_tokens: self.hint_tokens,
            life_tokens: self.life_tokens,
            fireworks: self.fireworks.clone(),
            discards: self.discards.clone(),
            last_action: self.last_action.clone(),
            deck_size: self.deck.len(),
            current_player: self.current_player,
            turn: self.turn,
            occupied: self.hands.iter().flatten().map(Option::is_some).collect(),
        }
    }

    /// Every other hand, starting from the agent's left.
    pub fn private_observation(&self, agent: usize) -> PrivateObservation {
        let slots = observed_slots(&self.config, agent)
            .into_iter()
            .map(|abs| self.slot_card(abs))
            .collect();
        PrivateObservation {
            observer: agent,
            hand_size: self.config.hand_size,
            slots,
        }
    }

    /// Deck, hands, discards and fireworks combined.
    pub fn card_census(&self) -> CardMultiset {
        let c = &self.config;
        let mut census = self.discards.clone();
        for &card in self.deck.iter().chain(self.hands.iter().flatten().flatten()) {
            census.add(card, c);
        }
        for (color, &height) in self.fireworks.iter().enumerate() {
            for rank in 1..=height {
                census.add(Card::new(color as u8, rank), c);
            }
        }
        census
    }

    /// Checks the state invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let c = &self.config;
        if self.card_census() != CardMultiset::full_deck(c) {
            return Err("card conservation violated".into());
        }
        if self.hint_tokens > c.max_hint_tokens {
            return Err(format!("hint tokens {} above max", self.hint_tokens));
        }
        if self.life_tokens > c.max_life_tokens {
            return Err(format!("life tokens {} above max", self.life_tokens));
        }
        if self.fireworks.iter().any(|&h| h as usize > c.n_rank) {
            return Err("firework above max rank".into());
        }
        for abs in 0..c.n_slots() {
            let col = super::slot_col(self.slot_card(abs), c);
            if !self.hint_mask.get(abs, col) {
                return Err(format!("hint mask excludes the true card in slot {abs}"));
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a digest of the full state.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv::new();
        let c = &self.config;
        for v in [c.n_color, c.n_rank, c.n_players, c.hand_size] {
            h.write_u64(v as u64);
        }
        h.write_u64(self.seed);
        h.write_u64(self.deck.len() as u64);
        for card in &self.deck {
            h.write(&[card.color, card.rank]);
        }
        for slot in self.hands.iter().flatten() {
            match slot {
                Some(card) => h.write(&[1, card.color, card.rank]),
                None => h.write(&[0]),
            }
        }
        h.write(&self.fireworks);
        h.write(&[self.hint_tokens, self.life_tokens, self.terminal as u8]);
        h.write(self.discards.counts());
        h.write(&self.hint_mask.as_slice().iter().map(|&b| b as u8).collect::<Vec<_>>());
        h.write_u64(self.current_player as u64);
        h.write_u64(self.turn as u64);
        h.write_u64(self.final_turns.map_or(u64::MAX, |t| t as u64));
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}
