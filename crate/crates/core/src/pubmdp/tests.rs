use std::path::PathBuf;

use rand::Rng;

use super::*;
use crate::belief::{likelihood_update, sample_hands, BeliefConfig, LikelihoodTable};
use crate::game::{Card, GameConfig, GameState};
use crate::matrix::{mg_optimal_solution, ExactBelief, PayoffTensor};
use crate::nn::{masked_softmax, NetSpec, Network};
use crate::rng::seeded_rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn toy_net(n_actions: usize, seed: u64) -> Network {
    Network::init(
        NetSpec {
            dense_inputs: 4,
            sparse_inputs: 2 * 3,
            hidden: vec![16],
            n_actions,
        },
        seed,
    )
}

fn all_legal(n: usize) -> LegalFn<'static> {
    Box::new(move |_: &[u16]| vec![true; n])
}

#[test]
fn same_inputs_same_partial_policy() {
    let net = toy_net(4, 1);
    let dense = [0.1, 0.0, 1.0, -0.5];
    let a = PartialPolicy::new(&net, &dense, 99, 1.0, 3, all_legal(4)).unwrap();
    let b = PartialPolicy::new(&net, &dense, 99, 1.0, 3, all_legal(4)).unwrap();
    let c = PartialPolicy::new(&net, &dense, 100, 1.0, 3, all_legal(4)).unwrap();
    let mut differs = false;
    for x in 0..3 {
        for y in 0..3 {
            let v = [x, y];
            assert_eq!(a.act(&v).unwrap(), b.act(&v).unwrap());
            differs |= a.act(&v).unwrap() != c.act(&v).unwrap();
        }
    }
    assert!(differs, "a new seed should realise a different partial policy");
}

#[test]
fn temperature_must_be_positive() {
    let net = toy_net(2, 1);
    assert!(PartialPolicy::new(&net, &[0.0; 4], 0, 0.0, 3, all_legal(2)).is_err());
    assert!(PartialPolicy::new(&net, &[0.0; 4], 0, -1.0, 3, all_legal(2)).is_err());
}

#[test]
fn high_temperature_is_argmax() {
    let mut rng = seeded_rng(3);
    let mut tested = 0;
    for seed in 0..200 {
        let mut net = toy_net(5, seed);
        for p in &mut net.params {
            *p *= 30.0;
        }
        let dense: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pi = PartialPolicy::new(&net, &dense, rng.gen(), 100.0, 3, all_legal(5)).unwrap();
        let view = [rng.gen_range(0..3u16), rng.gen_range(0..3u16)];
        let logits = pi.logits(&view);
        let mut sorted = logits.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] - sorted[1] < 0.5 {
            continue;
        }
        tested += 1;
        let argmax = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(pi.act(&view).unwrap(), argmax);
    }
    assert!(tested > 50);
}

#[test]
fn masking_rules() {
    let net = toy_net(4, 2);
    let single: LegalFn = Box::new(|_: &[u16]| vec![false, false, true, false]);
    let pi = PartialPolicy::new(&net, &[1.0; 4], 5, 1.0, 3, single).unwrap();
    assert_eq!(pi.act(&[0, 1]).unwrap(), 2);
    let none: LegalFn = Box::new(|_: &[u16]| vec![false; 4]);
    let pi = PartialPolicy::new(&net, &[1.0; 4], 5, 1.0, 3, none).unwrap();
    assert_eq!(pi.act(&[0, 1]), Err(PubMdpError::NoLegalAction));
    let p = masked_softmax(&[50.0, 0.0, 0.0, 0.0], &[false, true, true, true], 1.0);
    assert!(p[0] < 1e-30);
}

#[test]
fn partial_policy_factorises_across_views() {
    // P(pi(v1) = a, pi(v2) = b) over seeds equals p(a | v1) p(b | v2).
    let mut net = toy_net(3, 8);
    for p in &mut net.params {
        *p *= 10.0;
    }
    let dense = [0.3, -0.2, 0.5, 1.0];
    let (v1, v2) = ([0u16, 1], [2u16, 0]);
    let probe = PartialPolicy::new(&net, &dense, 0, 1.0, 3, all_legal(3)).unwrap();
    let (p1, p2) = (probe.probabilities(&v1), probe.probabilities(&v2));
    let n = 40_000;
    let mut counts = [[0usize; 3]; 3];
    for xi in 0..n {
        let pi = PartialPolicy::new(&net, &dense, xi, 1.0, 3, all_legal(3)).unwrap();
        counts[pi.act(&v1).unwrap()][pi.act(&v2).unwrap()] += 1;
    }
    for a in 0..3 {
        for b in 0..3 {
            let p = p1[a] * p2[b];
            let freq = counts[a][b] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "({a},{b}): {freq} vs {p}");
        }
    }
}

#[test]
fn inverse_cdf_skips_illegal() {
    assert_eq!(inverse_cdf(&[0.5, 0.0, 0.5], &[true, false, true], 0.7), 2);
    assert_eq!(inverse_cdf(&[0.5, 0.0, 0.5], &[true, false, true], 0.2), 0);
    assert_eq!(inverse_cdf(&[0.5, 0.0, 0.5], &[true, false, true], 0.999_999_999_999), 2);
}

// ---------------------------------------------------------------------------
// Transitions
// ---------------------------------------------------------------------------

fn mini() -> GameConfig {
    GameConfig::small(2, 2, 2)
}

fn cfg() -> BeliefConfig {
    BeliefConfig {
        sample_count: 4000,
        ..BeliefConfig::default()
    }
}

/// Applies `action` and returns the transition input pieces.
fn step(state: &mut GameState, action: crate::game::Action) -> (PublicFeatures, PublicFeatures, Option<usize>, usize) {
    let before = state.public_features();
    let actor = state.current_player();
    let out = state.apply(action).unwrap();
    let vacated = out.vacated_slot;
    (before, state.public_features(), vacated, actor)
}

#[test]
fn constant_policy_changes_only_grounded_information() {
    let c = mini();
    let mut state = GameState::new(c.clone(), 4).unwrap();
    let b0 = BeliefState::initial(&c, &state.public_features(), &cfg()).unwrap();
    let hint = state
        .legal_actions(0)
        .unwrap()
        .into_iter()
        .find(|a| matches!(a, crate::game::Action::HintColor { .. }))
        .unwrap();
    let observed = hint.index(&c, 0);
    let (before, after, vacated, actor) = step(&mut state, hint);
    let constant = move |_: &[u16]| observed;
    let input = TransitionInput {
        before: &before,
        after: &after,
        policy: &constant,
        observed,
        actor,
        vacated,
        sample_count: 4000,
        seed: 1,
    };
    let (b1, report) = public_belief_transition(&c, &cfg(), &b0, &input).unwrap();
    assert_eq!(b1.lik, b0.lik);
    assert!(report.samples_accepted > 0);
    let grounded = BeliefState::from_likelihood(b0.lik.clone(), &after, &cfg(), true).unwrap().0;
    assert_eq!(b1, grounded);
}

#[test]
fn single_legal_action_leaves_beliefs_unchanged() {
    let c = mini();
    let state = GameState::new(c.clone(), 9).unwrap();
    let f = state.public_features();
    let b0 = BeliefState::initial(&c, &f, &cfg()).unwrap();
    let no_action = c.n_actions() - 1;
    let policy = move |_: &[u16]| no_action;
    let input = TransitionInput {
        before: &f,
        after: &f,
        policy: &policy,
        observed: no_action,
        actor: 1,
        vacated: None,
        sample_count: 1000,
        seed: 2,
    };
    let (b1, _) = public_belief_transition(&c, &cfg(), &b0, &input).unwrap();
    assert_eq!(b1, b0);
}

/// Action 0 (play slot 0) iff the first observed card has colour 0.
fn revealing(c: &GameConfig) -> impl Fn(&[u16]) -> usize + '_ {
    move |view: &[u16]| {
        let col = view[0] as usize;
        if col < c.n_types() && Card::from_index(col, c).color == 0 {
            0
        } else {
            c.hand_size
        }
    }
}

#[test]
fn revealing_policy_raises_mass_on_truth() {
    let c = mini();
    let mut gains = 0;
    for seed in 0..40 {
        let state = GameState::new(c.clone(), seed).unwrap();
        let f = state.public_features();
        let b0 = BeliefState::initial(&c, &f, &cfg()).unwrap();
        let policy = revealing(&c);
        let view = state.private_observation(0).encode(&c);
        let observed = policy(&view);
        // Beliefs are updated from the pre-action features; the game state
        // is left untouched so the comparison isolates the likelihood.
        let input = TransitionInput {
            before: &f,
            after: &f,
            policy: &policy,
            observed,
            actor: 0,
            vacated: None,
            sample_count: 4000,
            seed,
        };
        let (b1, _) = public_belief_transition(&c, &cfg(), &b0, &input).unwrap();
        let slot = c.hand_size;
        let col = state.true_slots()[slot].unwrap().index(&c);
        assert!(b1.v2.get(slot, col) >= b0.v2.get(slot, col) - 1e-12);
        if b1.v2.get(slot, col) > b0.v2.get(slot, col) + 1e-3 {
            gains += 1;
        }
    }
    assert_eq!(gains, 40);
}

#[test]
fn transition_depends_on_counterfactual_branches() {
    let c = mini();
    let state = GameState::new(c.clone(), 12).unwrap();
    let f = state.public_features();
    let b0 = BeliefState::initial(&c, &f, &cfg()).unwrap();
    let actual = state.private_observation(0).encode(&c);
    let observed = 0;
    let a = |v: &[u16]| if v == actual.as_slice() { 0 } else { 1 };
    let b = |_: &[u16]| 0usize;
    assert_eq!(a(&actual), b(&actual));
    let samples = sample_hands(&b0.v2, &f.candidates, 4000, 5, 3);
    let slots = crate::game::observed_slots(&c, 0);
    let flat = LikelihoodTable::filled(c.n_slots(), c.n_cols(), 1.0);
    let la = likelihood_update(&flat, &samples, &a, observed, &slots, 1e-10);
    let lb = likelihood_update(&flat, &samples, &b, observed, &slots, 1e-10);
    assert_ne!(la, lb);
}

#[test]
fn hanabi_partial_policy_uses_counterfactual_legality() {
    let c = mini();
    let mut state = GameState::new(c.clone(), 1).unwrap();
    // Spend every hint token.
    while state.hint_tokens() > 0 {
        let p = state.current_player();
        let hint = state
            .legal_actions(p)
            .unwrap()
            .into_iter()
            .find(|a| matches!(a, crate::game::Action::HintRank { .. } | crate::game::Action::HintColor { .. }))
            .unwrap();
        state.apply(hint).unwrap();
    }
    let f = state.public_features();
    let actor = state.current_player();
    let legal = hanabi_legal_fn(&c, &f, actor);
    let mask = legal(&state.private_observation(actor).encode(&c));
    assert_eq!(mask.iter().filter(|&&b| b).count(), 2 * c.hand_size);
}

// ---------------------------------------------------------------------------
// Matrix-game reward
// ---------------------------------------------------------------------------

#[test]
fn bad_reward_cases() {
    let t = PayoffTensor::from_fn(|c1, c2, u1, u2| (c1 * 1000 + c2 * 100 + u1 * 10 + u2) as f64);
    let p1 = [2, 0];
    let p2 = [[1, 1, 2], [0, 2, 1]];
    let r = bad_reward(&ExactBelief::point(1), &ExactBelief::point(0), &p1, &p2, &t);
    assert_eq!(r, t.get(1, 0, 0, 1));
    let c = PayoffTensor::constant(3.5);
    let u = ExactBelief::uniform();
    assert_eq!(bad_reward(&u, &u, &p1, &p2, &c), 3.5);
    let fixture = PayoffTensor::load(fixture("matrix_payoff.json")).unwrap();
    let best = mg_optimal_solution(&fixture);
    assert_eq!(bad_reward(&u, &u, &best.p1, &best.p2, &fixture), best.value);
}

#[test]
fn layout_is_fixed_per_config() {
    let c = GameConfig::standard(2);
    let l = PublicLayout::new(&c);
    assert_eq!(l.len, 638);
    assert_eq!((l.hint_mask, l.belief, l.last_action), (61, 321, 583));
    let s = GameState::new(c.clone(), 3).unwrap();
    let f = s.public_features();
    let b = BeliefState::initial(&c, &f, &BeliefConfig::default()).unwrap();
    for agent in 0..2 {
        let x = encode_public(&c, &l, &f, &b.v2, agent);
        assert_eq!(x.len(), l.len);
        assert!(x.iter().all(|v| v.is_finite()));
        assert_eq!(x[l.acting], if agent == 0 { 1.0 } else { 0.0 });
        assert_eq!(x[l.hint_tokens..l.hint_tokens + 8], [1.0; 8]);
    }
    assert_eq!(private_width(&c), 5 * 26);
    assert_eq!(own_width(&c), 5 * 26);
}
