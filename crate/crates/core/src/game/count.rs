use serde::{Deserialize, Serialize};

use super::{CardMultiset, GameConfig, GameError};

/// Number of possible initial joint hands for a two-player game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointHandCount {
    /// Deals where slot order matters (each slot holds a card type; copies of
    /// the same type are indistinguishable).
    pub ordered: u128,
    /// Pairs of unordered hands (one multiset per player).
    pub unordered: u128,
    /// Deals of physically distinct cards into ordered slots.
    pub physical: u128,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Counts distinct joint deals of both hands from a fresh deck by dynamic
/// programming over card types. Exact; cannot overflow for supported configs
/// (at most 32 slots over 256 types stays far below 2^128).
pub fn count_joint_hands(config: &GameConfig) -> Result<JointHandCount, GameError> {
    if config.n_players != 2 {
        return Err(GameError::Unsupported(
            "joint-hand counting is defined for two players".into(),
        ));
    }
    let deck = CardMultiset::full_deck(config);
    Ok(JointHandCount {
        ordered: count_ordered(deck.counts(), 2 * config.hand_size),
        unordered: count_hand_pairs(deck.counts(), config.hand_size),
        physical: (0..2 * config.hand_size as u128)
            .map(|i| deck.total() as u128 - i)
            .product(),
    })
}

/// Sequences of length `n` over types with per-type caps `counts`.
pub fn count_ordered(counts: &[u8], n: usize) -> u128 {
    // ways[j]: sequences of length j using the types seen so far; adding k
    // copies of a new type interleaves them in C(j + k, k) ways.
    let mut ways = vec![0u128; n + 1];
    ways[0] = 1;
    for &cap in counts {
        let mut next = vec![0u128; n + 1];
        for (j, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for k in 0..=(cap as usize).min(n - j) {
                next[j + k] += w * binomial(j + k, k);
            }
        }
        ways = next;
    }
    ways[n]
}

/// Pairs (hand A, hand B) of multisets of size `hand` each drawn jointly
/// without exceeding `counts`.
pub fn count_hand_pairs(counts: &[u8], hand: usize) -> u128 {
    let w = hand + 1;
    let mut ways = vec![0u128; w * w];
    ways[0] = 1;
    for &cap in counts {
        let mut next = vec![0u128; w * w];
        for a in 0..=hand {
            for b in 0..=hand {
                let cur = ways[a * w + b];
                if cur == 0 {
                    continue;
                }
                for ka in 0..=(cap as usize).min(hand - a) {
                    for kb in 0..=(cap as usize - ka).min(hand - b) {
                        next[(a + ka) * w + b + kb] += cur;
                    }
                }
            }
        }
        ways = next;
    }
    ways[hand * w + hand]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates every ordered selection of physical cards and collapses
    /// identical type sequences.
    fn brute_ordered(counts: &[u8], n: usize) -> u128 {
        let cards: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| std::iter::repeat(t).take(c as usize))
            .collect();
        let mut seen = std::collections::HashSet::new();
        fn rec(
            cards: &[usize],
            used: &mut Vec<bool>,
            seq: &mut Vec<usize>,
            n: usize,
            seen: &mut std::collections::HashSet<Vec<usize>>,
        ) {
            if seq.len() == n {
                seen.insert(seq.clone());
                return;
            }
            for i in 0..cards.len() {
                if !used[i] {
                    used[i] = true;
                    seq.push(cards[i]);
                    rec(cards, used, seq, n, seen);
                    seq.pop();
                    used[i] = false;
                }
            }
        }
        rec(&cards, &mut vec![false; cards.len()], &mut Vec::new(), n, &mut seen);
        seen.len() as u128
    }

    #[test]
    fn tiny_deck_by_hand() {
        // One colour, two ranks, hand 1: deck {3 x r1, 1 x r2}.
        let c = GameConfig {
            n_color: 1,
            n_rank: 2,
            hand_size: 1,
            ..GameConfig::standard(2)
        };
        let n = count_joint_hands(&c).unwrap();
        // Type sequences: (1,1), (1,2), (2,1).
        assert_eq!(n.ordered, 3);
        assert_eq!(n.unordered, 3);
        // 4 * 3 physical-card deals.
        assert_eq!(n.physical, 12);
    }

    #[test]
    fn matches_brute_force_on_small_decks() {
        for (colors, ranks, hand) in [(1, 2, 1), (2, 2, 1), (2, 2, 2), (1, 3, 2), (2, 3, 2)] {
            let c = GameConfig::small(colors, ranks, hand);
            let deck = CardMultiset::full_deck(&c);
            let n = count_joint_hands(&c).unwrap();
            assert_eq!(n.ordered, brute_ordered(deck.counts(), 2 * hand), "{colors}x{ranks} h{hand}");
        }
    }

    #[test]
    fn empty_hand_is_one() {
        assert_eq!(count_ordered(&[3, 1], 0), 1);
        assert_eq!(count_hand_pairs(&[3, 1], 0), 1);
    }

    #[test]
    fn standard_magnitude() {
        let n = count_joint_hands(&GameConfig::standard(2)).unwrap();
        assert!(n.ordered > 5.9e13 as u128 && n.ordered < 6.5e13 as u128, "{}", n.ordered);
        assert_eq!(n.ordered, 62_196_739_659_600);
        assert_eq!(n.unordered, 7_450_814_014);
    }

    #[test]
    fn rejects_more_players() {
        assert!(count_joint_hands(&GameConfig::standard(3)).is_err());
    }
}
