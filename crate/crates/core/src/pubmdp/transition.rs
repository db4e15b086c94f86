use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::belief::{
    bb_belief, likelihood_update, reset_slot, sample_hands, v0_belief, v1_iterate, v2_belief, BeliefConfig,
    FactorisedBelief, LikelihoodTable, ObservationPolicy,
};
use crate::game::{observed_slots, GameConfig, PublicFeatures};

use super::{BeliefVariant, PubMdpError};

/// Likelihood table plus every belief derived from it and the public
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub lik: LikelihoodTable,
    pub v0: FactorisedBelief,
    pub v1: FactorisedBelief,
    pub bb: FactorisedBelief,
    pub v2: FactorisedBelief,
}

/// What happened during one belief transition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub samples_accepted: usize,
    pub samples_requested: usize,
    /// No legal hand was sampled, so the likelihood step was skipped.
    pub likelihood_skipped: bool,
    /// Slots whose V1 or BB iteration fell back to the previous row.
    pub fallback_slots: BTreeSet<usize>,
}

impl BeliefState {
    /// Beliefs at the start of a game: flat likelihood.
    pub fn initial(c: &GameConfig, f: &PublicFeatures, cfg: &BeliefConfig) -> Result<Self, PubMdpError> {
        let lik = LikelihoodTable::filled(c.n_slots(), c.n_cols(), 1.0);
        Ok(Self::from_likelihood(lik, f, cfg, true)?.0)
    }

    /// Recomputes V0, V1, BB and V2 from `lik` and the public features. With
    /// `with_bb == false`, BB and V2 are copies of V1 (for agents that never
    /// track likelihoods).
    pub fn from_likelihood(
        lik: LikelihoodTable,
        f: &PublicFeatures,
        cfg: &BeliefConfig,
        with_bb: bool,
    ) -> Result<(Self, BTreeSet<usize>), PubMdpError> {
        let v0 = v0_belief(&f.candidates, &f.hint_mask)?;
        let (v1, r1) = v1_iterate(&v0, &f.candidates, &f.hint_mask, cfg.iterations, cfg.tolerance)?;
        let mut fallback = r1.fallback_slots;
        let (bb, v2) = if with_bb {
            let (bb, r2) = bb_belief(&f.candidates, &f.hint_mask, &lik, cfg.iterations, cfg.tolerance)?;
            fallback.extend(r2.fallback_slots);
            let v2 = v2_belief(&bb, &v1, cfg.v1_mixin)?;
            (bb, v2)
        } else {
            (v1.clone(), v1.clone())
        };
        Ok((BeliefState { lik, v0, v1, bb, v2 }, fallback))
    }

    pub fn rows(&self, variant: BeliefVariant) -> &FactorisedBelief {
        match variant {
            BeliefVariant::V0 => &self.v0,
            BeliefVariant::V1 => &self.v1,
            BeliefVariant::V2 => &self.v2,
        }
    }
}

/// Everything a belief transition needs besides the previous beliefs.
pub struct TransitionInput<'p, P: ObservationPolicy + ?Sized> {
    /// Public features before the action.
    pub before: &'p PublicFeatures,
    /// Public features after the action (and any draw).
    pub after: &'p PublicFeatures,
    /// The partial policy that produced the action.
    pub policy: &'p P,
    /// Observed action index (actor-relative).
    pub observed: usize,
    pub actor: usize,
    /// Absolute slot that was emptied and refilled by a play or discard.
    pub vacated: Option<usize>,
    /// Hand samples to draw; 0 disables the likelihood step.
    pub sample_count: usize,
    pub seed: u64,
}

/// One public-belief transition: sample hands from the current V2, update
/// the actor-observed likelihood rows from the partial policy, forget the
/// refilled slot, then recompute V0, V1, BB and V2 from the new public
/// features.
pub fn public_belief_transition<P: ObservationPolicy + ?Sized>(
    c: &GameConfig,
    cfg: &BeliefConfig,
    prev: &BeliefState,
    input: &TransitionInput<'_, P>,
) -> Result<(BeliefState, TransitionReport), PubMdpError> {
    let mut report = TransitionReport::default();
    let mut lik = prev.lik.clone();
    if input.sample_count > 0 {
        let samples = sample_hands(
            &prev.v2,
            &input.before.candidates,
            input.sample_count,
            cfg.oversample_factor,
            input.seed,
        );
        report.samples_accepted = samples.len();
        report.samples_requested = input.sample_count;
        if samples.is_empty() {
            report.likelihood_skipped = true;
        } else {
            let slots = observed_slots(c, input.actor);
            lik = likelihood_update(
                &lik,
                &samples,
                input.policy,
                input.observed,
                &slots,
                cfg.likelihood_floor,
            );
        }
    }
    if let Some(slot) = input.vacated {
        reset_slot(&mut lik, slot);
    }
    let (next, fallback) = BeliefState::from_likelihood(lik, input.after, cfg, true)?;
    report.fallback_slots = fallback;
    Ok((next, report))
}
