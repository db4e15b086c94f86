use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::rng::seeded_rng;

const R: u8 = 0;
const Y: u8 = 1;

fn card(color: u8, rank: u8) -> Card {
    Card::new(color, rank)
}

/// Builds a full deck whose first cards are `front` (dealt in round-robin slot
/// order) followed by the remaining cards in canonical order.
fn stacked(config: &GameConfig, front: &[Card]) -> GameState {
    let mut rest = CardMultiset::full_deck(config);
    for &c in front {
        assert!(rest.remove(c, config), "{c} over-used");
    }
    let mut deck = front.to_vec();
    for i in 0..config.n_types() {
        for _ in 0..rest.get(i) {
            deck.push(Card::from_index(i, config));
        }
    }
    GameState::from_ordered_deck(config.clone(), deck).unwrap()
}

/// Interleaves two hands into round-robin deal order.
fn deal_order(p0: &[Card], p1: &[Card]) -> Vec<Card> {
    p0.iter().zip(p1).flat_map(|(a, b)| [*a, *b]).collect()
}

#[test]
fn new_game_standard() {
    let s = GameState::new(GameConfig::standard(2), 1).unwrap();
    assert_eq!(s.config().deck_size(), 50);
    assert_eq!(s.deck().len(), 40);
    assert_eq!(s.hint_tokens(), 8);
    assert_eq!(s.life_tokens(), 3);
    assert!(s.fireworks().iter().all(|&h| h == 0));
    for abs in 0..10 {
        let row = s.hint_mask().row(abs);
        assert!(row[..25].iter().all(|&b| b));
        assert!(!row[25]);
    }
    s.check_invariants().unwrap();
}

#[test]
fn new_game_small_deck() {
    let s = GameState::new(GameConfig::small(2, 2, 2), 3).unwrap();
    assert_eq!(s.config().deck_size(), 8);
    assert_eq!(s.deck().len(), 4);
}

#[test]
fn new_game_is_seed_deterministic() {
    let a = GameState::new(GameConfig::standard(2), 42).unwrap();
    let b = GameState::new(GameConfig::standard(2), 42).unwrap();
    let c = GameState::new(GameConfig::standard(2), 43).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.state_hash(), b.state_hash());
    assert_ne!(a.deck(), c.deck());
}

#[test]
fn invalid_config_rejected() {
    let bad = GameConfig {
        n_rank: 1,
        ..GameConfig::standard(2)
    };
    assert!(matches!(GameState::new(bad, 0), Err(GameError::InvalidConfig(_))));
}

#[test]
fn legal_actions_count_with_partner_hand() {
    let c = GameConfig::standard(2);
    let p0 = [card(0, 2), card(1, 2), card(2, 2), card(3, 2), card(4, 2)];
    let p1 = [card(0, 1), card(1, 1), card(2, 2), card(3, 3), card(4, 4)];
    let s = stacked(&c, &deal_order(&p0, &p1));
    assert_eq!(s.hand(1), p1.map(Some).as_slice());
    let legal = s.legal_actions(0).unwrap();
    // 5 plays + 5 discards + 5 colour hints + rank hints {1,2,3,4}.
    assert_eq!(legal.len(), 19);
    assert!(!legal.contains(&Action::HintRank { target: 1, rank: 5 }));
    assert_eq!(s.legal_actions(1).unwrap(), vec![Action::NoAction]);
}

#[test]
fn no_hints_without_tokens() {
    let mut s = GameState::new(GameConfig::standard(2), 5).unwrap();
    while s.hint_tokens() > 0 {
        let actor = s.current_player();
        let hint = s
            .legal_actions(actor)
            .unwrap()
            .into_iter()
            .find(Action::is_hint)
            .unwrap();
        s.apply(hint).unwrap();
    }
    let legal = s.legal_actions(s.current_player()).unwrap();
    assert_eq!(legal.len(), 2 * s.config().hand_size);
    assert!(legal.iter().all(|a| !a.is_hint()));
}

#[test]
fn discard_at_max_hints_flag() {
    let c = GameConfig {
        allow_discard_at_max_hints: false,
        ..GameConfig::standard(2)
    };
    let mut s = GameState::new(c, 9).unwrap();
    let legal = s.legal_actions(0).unwrap();
    assert!(!legal.iter().any(|a| matches!(a, Action::Discard { .. })));
    assert!(matches!(
        s.apply(Action::Discard { slot: 0 }),
        Err(GameError::IllegalAction { .. })
    ));
}

#[test]
fn playable_card_scores() {
    let c = GameConfig::standard(2);
    let p0 = [card(R, 1), card(R, 2), card(R, 3), card(R, 4), card(R, 5)];
    let p1 = [card(Y, 1), card(Y, 1), card(Y, 1), card(Y, 2), card(Y, 2)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    let out = s.apply(Action::Play { slot: 0 }).unwrap();
    assert_eq!(out.reward, 1);
    assert_eq!(s.fireworks()[R as usize], 1);
    assert_eq!(out.vacated_slot, Some(0));
    s.check_invariants().unwrap();
}

#[test]
fn completing_firework_returns_token() {
    let c = GameConfig::standard(2);
    let p0 = [card(R, 1), card(R, 2), card(R, 3), card(R, 4), card(R, 5)];
    let p1 = [card(Y, 1), card(Y, 1), card(Y, 1), card(Y, 2), card(Y, 2)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    for slot in 0..4 {
        s.apply(Action::Play { slot }).unwrap();
        if slot < 3 {
            s.apply(Action::Discard { slot: 0 }).unwrap();
        }
    }
    let target_color = s.hand(0).iter().flatten().next().unwrap().color;
    s.apply(Action::HintColor { target: 0, color: target_color }).unwrap();
    assert_eq!(s.hint_tokens(), 7);
    let out = s.apply(Action::Play { slot: 4 }).unwrap();
    assert_eq!(out.reward, 1);
    assert_eq!(s.fireworks()[R as usize], 5);
    assert_eq!(s.hint_tokens(), 8);
}

#[test]
fn three_bombs_end_the_game() {
    let c = GameConfig::standard(2);
    let p0 = [card(R, 3), card(R, 3), card(R, 4), card(R, 4), card(R, 5)];
    let p1 = [card(Y, 3), card(Y, 3), card(Y, 4), card(Y, 4), card(Y, 5)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    let mut last = None;
    for slot in [4, 4, 3] {
        let out = s.apply(Action::Play { slot }).unwrap();
        assert_eq!(out.reward, 0);
        last = Some(out);
    }
    assert_eq!(s.life_tokens(), 0);
    assert!(last.unwrap().terminal);
    assert!(s.is_terminal());
    assert_eq!(s.legal_actions(0), Err(GameError::Terminal));
    assert_eq!(s.apply(Action::Play { slot: 0 }), Err(GameError::Terminal));
    // Misplayed cards go to the discards without refunding hint tokens.
    assert_eq!(s.discards().total(), 3);
    assert_eq!(s.hint_tokens(), 8);
}

#[test]
fn hint_sets_positive_and_negative_information() {
    let c = GameConfig::standard(2);
    let p0 = [card(Y, 1), card(Y, 1), card(Y, 1), card(Y, 2), card(Y, 2)];
    // Partner's slots 2 and 4 (1-based) are red.
    let p1 = [card(2, 1), card(R, 2), card(3, 1), card(R, 3), card(4, 1)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    s.apply(Action::HintColor { target: 1, color: R }).unwrap();
    let hm = s.hint_mask();
    for slot in 0..5 {
        let abs = 5 + slot;
        let is_red_slot = slot == 1 || slot == 3;
        for col in 0..25 {
            let red_col = Card::from_index(col, &c).color == R;
            assert_eq!(hm.get(abs, col), red_col == is_red_slot, "slot {slot} col {col}");
        }
    }
    let rec = s.last_action().unwrap();
    assert_eq!(rec.hinted_slots, 0b01010);
    assert_eq!(s.hint_tokens(), 7);
    // The hinter's own rows are untouched.
    assert!(s.hint_mask().row(0)[..25].iter().all(|&b| b));
    s.check_invariants().unwrap();
}

#[test]
fn empty_hint_rejected() {
    let c = GameConfig::standard(2);
    let p0 = [card(Y, 1), card(Y, 1), card(Y, 1), card(Y, 2), card(Y, 2)];
    let p1 = [card(2, 1), card(R, 2), card(3, 1), card(R, 3), card(4, 1)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    let err = s.apply(Action::HintColor { target: 1, color: Y }).unwrap_err();
    assert!(matches!(err, GameError::IllegalAction { ref reason, .. } if reason == "empty hint"));
    assert!(s.apply(Action::HintRank { target: 0, rank: 1 }).is_err());
    assert!(s.apply(Action::NoAction).is_err());
    assert!(s.apply(Action::Play { slot: 7 }).is_err());
    assert_eq!(s.turn(), 0);
}

#[test]
fn candidates_exclude_public_cards_only() {
    let c = GameConfig::standard(2);
    let fresh = GameState::new(c.clone(), 0).unwrap().public_features();
    assert_eq!(fresh.candidates.total(), 50);

    let p0 = [card(R, 1), card(R, 1), card(Y, 2), card(Y, 3), card(Y, 4)];
    let p1 = [card(Y, 1), card(Y, 1), card(Y, 1), card(2, 2), card(2, 2)];
    let mut s = stacked(&c, &deal_order(&p0, &p1));
    s.apply(Action::Play { slot: 0 }).unwrap();
    s.apply(Action::Discard { slot: 4 }).unwrap();
    s.apply(Action::Discard { slot: 1 }).unwrap();
    let pf = s.public_features();
    assert_eq!(pf.candidates.count(card(R, 1), &c), 1);
    assert!(pf.candidates.counts().iter().all(|&n| n <= 3));
    assert_eq!(pf.candidates.total(), 50 - 3);
}

#[test]
fn private_observation_views() {
    let s = GameState::new(GameConfig::standard(2), 17).unwrap();
    let o0 = s.private_observation(0);
    let o1 = s.private_observation(1);
    assert_eq!(o0.slots.len(), 5);
    assert_eq!(o0.slots, s.hand(1));
    assert_eq!(o1.slots, s.hand(0));
    assert_eq!(observed_slots(s.config(), 0), (5..10).collect::<Vec<_>>());
    assert_eq!(observed_slots(s.config(), 1), (0..5).collect::<Vec<_>>());

    let s3 = GameState::new(GameConfig::standard(3), 17).unwrap();
    let o = s3.private_observation(1);
    assert_eq!(o.slots.len(), 2 * 5);
    assert_eq!(o.hand(0), s3.hand(2));
    assert_eq!(o.hand(1), s3.hand(0));
}

/// Plays every card in the order it is needed: each player always plays slot 0
/// and draws exactly the next card required.
pub(crate) fn perfect_game(config: &GameConfig) -> GameState {
    assert_eq!(config.n_players, 2);
    let needed: Vec<Card> = (0..config.n_color as u8)
        .flat_map(|c| (1..=config.n_rank as u8).map(move |r| Card::new(c, r)))
        .collect();
    let mut rest = CardMultiset::full_deck(config);
    for &c in &needed {
        rest.remove(c, config);
    }
    let mut junk: Vec<Card> = (0..config.n_types())
        .flat_map(|i| std::iter::repeat(Card::from_index(i, config)).take(rest.get(i) as usize))
        .collect();
    let h = config.hand_size;
    let mut deck = Vec::new();
    for s in 0..h {
        for p in 0..2 {
            deck.push(if s == 0 { needed[p] } else { junk.remove(0) });
        }
    }
    deck.extend_from_slice(&needed[2..]);
    deck.extend(junk);
    let mut state = GameState::from_ordered_deck(config.clone(), deck).unwrap();
    while !state.is_terminal() {
        state.apply(Action::Play { slot: 0 }).unwrap();
    }
    state
}

#[test]
fn perfect_score() {
    let c = GameConfig::standard(2);
    let s = perfect_game(&c);
    assert_eq!(s.score(), 25);
    assert_eq!(s.life_tokens(), 3);
    assert!(s.fireworks().iter().all(|&h| h == 5));
    let fresh = GameState::new(c, 0).unwrap();
    assert_eq!(fresh.score(), 0);
}

#[test]
fn strict_scoring_zeroes_bombed_games() {
    let c = GameConfig {
        strict_scoring: true,
        ..GameConfig::standard(2)
    };
    // Build 12 points with colours R, Y, G (ranks 1..4) then bomb three times.
    let mut needed: Vec<Card> = Vec::new();
    for color in 0..3 {
        for rank in 1..=4 {
            needed.push(card(color, rank));
        }
    }
    let bombs = [card(4, 5), card(4, 4), card(4, 4)];
    let mut seq = needed.clone();
    seq.extend_from_slice(&bombs);
    let mut rest = CardMultiset::full_deck(&c);
    for &x in &seq {
        rest.remove(x, &c);
    }
    let mut junk: Vec<Card> = (0..c.n_types())
        .flat_map(|i| std::iter::repeat(Card::from_index(i, &c)).take(rest.get(i) as usize))
        .collect();
    let mut deck = Vec::new();
    for s in 0..5 {
        for p in 0..2 {
            deck.push(if s == 0 { seq[p] } else { junk.remove(0) });
        }
    }
    deck.extend_from_slice(&seq[2..]);
    deck.extend(junk);
    let mut s = GameState::from_ordered_deck(c.clone(), deck).unwrap();
    while !s.is_terminal() {
        s.apply(Action::Play { slot: 0 }).unwrap();
    }
    assert_eq!(s.life_tokens(), 0);
    assert_eq!(s.raw_score(), 12);
    assert_eq!(s.score(), 0);
}

#[test]
fn last_card_gives_everyone_one_more_turn() {
    // Mini deck: 8 cards, 4 dealt, 4 to draw.
    let c = GameConfig::small(2, 2, 2);
    let mut s = GameState::new(c, 11).unwrap();
    let mut turns_after_empty = 0;
    let mut seen_empty = false;
    while !s.is_terminal() {
        let actor = s.current_player();
        let action = s
            .legal_actions(actor)
            .unwrap()
            .into_iter()
            .find(|a| matches!(a, Action::Discard { .. }))
            .unwrap();
        let before = s.deck().len();
        s.apply(action).unwrap();
        if seen_empty {
            turns_after_empty += 1;
        }
        if before == 1 && s.deck().is_empty() {
            seen_empty = true;
        }
        s.check_invariants().unwrap();
    }
    assert!(seen_empty);
    assert_eq!(turns_after_empty, 2);
    // Refill-less slots show up as null in the hint mask.
    let empties = s.true_slots().iter().filter(|c| c.is_none()).count();
    assert_eq!(empties, 2);
}

fn random_game(config: &GameConfig, seed: u64) -> Vec<Action> {
    let mut rng = seeded_rng(seed ^ 0xabc);
    let mut s = GameState::new(config.clone(), seed).unwrap();
    let mut actions = Vec::new();
    while !s.is_terminal() {
        let legal = s.legal_actions(s.current_player()).unwrap();
        let a = legal[rng.gen_range(0..legal.len())];
        let before: Vec<u8> = s.fireworks().to_vec();
        s.apply(a).unwrap();
        s.check_invariants().unwrap();
        assert!(s.fireworks().iter().zip(&before).all(|(a, b)| a >= b));
        actions.push(a);
    }
    actions
}

proptest! {
    #[test]
    fn random_play_preserves_invariants(seed in any::<u64>(), mini in any::<bool>()) {
        let config = if mini { GameConfig::small(2, 3, 2) } else { GameConfig::standard(2) };
        let actions = random_game(&config, seed);
        // Replaying the action list reproduces the same final state.
        let mut a = GameState::new(config.clone(), seed).unwrap();
        let mut b = GameState::new(config, seed).unwrap();
        for &act in &actions {
            a.apply(act).unwrap();
            b.apply(act).unwrap();
            prop_assert_eq!(a.state_hash(), b.state_hash());
        }
        prop_assert!(a.is_terminal());
    }

    #[test]
    fn every_legal_action_applies(seed in any::<u64>(), players in 2usize..=5) {
        let config = GameConfig::standard(players);
        let mut rng = seeded_rng(seed);
        let mut s = GameState::new(config, seed).unwrap();
        for _ in 0..20 {
            if s.is_terminal() { break; }
            let legal = s.legal_actions(s.current_player()).unwrap();
            for &a in &legal {
                let mut probe = s.clone();
                prop_assert!(probe.apply(a).is_ok(), "{:?}", a);
            }
            s.apply(legal[rng.gen_range(0..legal.len())]).unwrap();
        }
    }
}
