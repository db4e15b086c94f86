//! The public belief MDP: agents act on (public belief, public features) by
//! publicly selecting a deterministic partial policy, and every observer
//! updates the public belief from the whole partial policy, not just the
//! executed action.

mod encoding;
mod partial;
mod transition;

pub use encoding::{
    encode_public, own_active, own_width, private_active, private_width, BeliefVariant, PublicLayout,
};
pub use partial::{inverse_cdf, LegalFn, PartialPolicy};
pub use transition::{public_belief_transition, BeliefState, TransitionInput, TransitionReport};

use thiserror::Error;

use crate::belief::BeliefError;
use crate::game::{legal_action_mask, GameConfig, PublicFeatures};
use crate::matrix::{ExactBelief, P1Strategy, P2Strategy, PayoffTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PubMdpError {
    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("no legal action for this view")]
    NoLegalAction,
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Legality closure for the acting Hanabi agent: depends on public facts and
/// on the (possibly counterfactual) view of the other hands.
pub fn hanabi_legal_fn<'a>(c: &'a GameConfig, f: &PublicFeatures, actor: usize) -> LegalFn<'a> {
    let hint_tokens = f.hint_tokens;
    let own = f.own_occupied(c, actor).to_vec();
    Box::new(move |view: &[u16]| legal_action_mask(c, hint_tokens, &own, view))
}

/// Expected reward of a partial-policy profile in the matrix game under
/// independent beliefs over the two cards: sums belief mass times
/// `payoff[c1][c2][p1(c1)][p2(c2, p1(c1))]`.
pub fn bad_reward(
    b1: &ExactBelief,
    b2: &ExactBelief,
    p1: &P1Strategy,
    p2: &P2Strategy,
    payoff: &PayoffTensor,
) -> f64 {
    let mut total = 0.0;
    for c1 in 0..2 {
        for c2 in 0..2 {
            let u1 = p1[c1];
            total += b1.0[c1] * b2.0[c2] * payoff.get(c1, c2, u1, p2[c2][u1]);
        }
    }
    total
}

#[cfg(test)]
mod tests;
