use std::fmt;

use serde::{Deserialize, Serialize};

use super::GameConfig;

/// A Hanabi card. `rank` is 1-based. An empty slot is `Option::<Card>::None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Card {
    pub color: u8,
    pub rank: u8,
}

impl Card {
    pub const fn new(color: u8, rank: u8) -> Self {
        Card { color, rank }
    }

    /// Column index of this card type in beliefs and hint masks.
    #[inline]
    pub fn index(self, config: &GameConfig) -> usize {
        self.color as usize * config.n_rank + (self.rank as usize - 1)
    }

    #[inline]
    pub fn from_index(index: usize, config: &GameConfig) -> Self {
        Card {
            color: (index / config.n_rank) as u8,
            rank: (index % config.n_rank + 1) as u8,
        }
    }

    pub fn is_valid(self, config: &GameConfig) -> bool {
        (self.color as usize) < config.n_color && self.rank >= 1 && (self.rank as usize) <= config.n_rank
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: &[u8] = b"RYGWBabcdefghijk";
        let c = NAMES.get(self.color as usize).copied().unwrap_or(b'?') as char;
        write!(f, "{c}{}", self.rank)
    }
}

/// Column index of a slot's content, with empty slots mapped to the null column.
#[inline]
pub fn slot_col(card: Option<Card>, config: &GameConfig) -> usize {
    match card {
        Some(c) => c.index(config),
        None => config.null_col(),
    }
}

/// Counts per card type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CardMultiset {
    counts: Vec<u8>,
}

impl CardMultiset {
    pub fn empty(config: &GameConfig) -> Self {
        CardMultiset {
            counts: vec![0; config.n_types()],
        }
    }

    /// Composition of a fresh deck.
    pub fn full_deck(config: &GameConfig) -> Self {
        let counts = (0..config.n_types())
            .map(|i| config.copies_of_rank(i % config.n_rank + 1))
            .collect();
        CardMultiset { counts }
    }

    pub fn from_counts(counts: Vec<u8>) -> Self {
        CardMultiset { counts }
    }

    #[inline]
    pub fn get(&self, index: usize) -> u8 {
        self.counts[index]
    }

    pub fn count(&self, card: Card, config: &GameConfig) -> u8 {
        self.counts[card.index(config)]
    }

    pub fn add(&mut self, card: Card, config: &GameConfig) {
        self.counts[card.index(config)] += 1;
    }

    /// Removes one copy; returns false (and leaves the set unchanged) if absent.
    pub fn remove(&mut self, card: Card, config: &GameConfig) -> bool {
        let slot = &mut self.counts[card.index(config)];
        if *slot == 0 {
            return false;
        }
        *slot -= 1;
        true
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let c = GameConfig::standard(2);
        for i in 0..c.n_types() {
            let card = Card::from_index(i, &c);
            assert!(card.is_valid(&c));
            assert_eq!(card.index(&c), i);
        }
        assert_eq!(slot_col(None, &c), 25);
    }

    #[test]
    fn fresh_composition() {
        let c = GameConfig::standard(2);
        let deck = CardMultiset::full_deck(&c);
        assert_eq!(deck.total(), 50);
        assert_eq!(deck.count(Card::new(0, 1), &c), 3);
        assert_eq!(deck.count(Card::new(4, 3), &c), 2);
        assert_eq!(deck.count(Card::new(2, 5), &c), 1);

        let mini = GameConfig::small(2, 2, 2);
        let deck = CardMultiset::full_deck(&mini);
        assert_eq!(deck.counts(), &[3, 1, 3, 1]);
    }
}
