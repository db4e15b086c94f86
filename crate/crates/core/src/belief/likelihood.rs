use std::collections::HashMap;

use super::{HandSamples, LikelihoodTable};

/// A deterministic map from an actor's (possibly counterfactual) private view
/// to an action index.
pub trait ObservationPolicy {
    fn action_for(&self, view: &[u16]) -> usize;
}

impl<F: Fn(&[u16]) -> usize> ObservationPolicy for F {
    fn action_for(&self, view: &[u16]) -> usize {
        self(view)
    }
}

/// Per observed slot and value `v`:
/// `E[1(f[i] = v) 1(policy(view) = observed)] / E[1(f[i] = v)]` over the
/// weighted samples. Values never sampled get multiplier 1.
///
/// `observed_slots` lists, in view order, the absolute slots that make up the
/// actor's private view. The policy is queried once per distinct view.
pub fn likelihood_multipliers<P: ObservationPolicy + ?Sized>(
    samples: &HandSamples,
    policy: &P,
    observed: usize,
    observed_slots: &[usize],
    n_cols: usize,
) -> Vec<Vec<f64>> {
    let k = observed_slots.len();
    let mut num = vec![0.0; k * n_cols];
    let mut den = vec![0.0; k * n_cols];
    let mut cache: HashMap<Vec<u16>, usize> = HashMap::new();
    let mut view = vec![0u16; k];
    for (hand, w) in samples.iter() {
        for (v, &slot) in view.iter_mut().zip(observed_slots) {
            *v = hand[slot];
        }
        let action = match cache.get(view.as_slice()) {
            Some(&a) => a,
            None => {
                let a = policy.action_for(&view);
                cache.insert(view.clone(), a);
                a
            }
        };
        let hit = if action == observed { w } else { 0.0 };
        for (i, &col) in view.iter().enumerate() {
            den[i * n_cols + col as usize] += w;
            num[i * n_cols + col as usize] += hit;
        }
    }
    (0..k)
        .map(|i| {
            (0..n_cols)
                .map(|c| {
                    let d = den[i * n_cols + c];
                    if d > 0.0 {
                        num[i * n_cols + c] / d
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Multiplies the observed slots' likelihood rows by the sampled action
/// likelihoods, floors them and rescales each touched row to a maximum of one.
/// Rows outside `observed_slots` are returned unchanged.
pub fn likelihood_update<P: ObservationPolicy + ?Sized>(
    lik: &LikelihoodTable,
    samples: &HandSamples,
    policy: &P,
    observed: usize,
    observed_slots: &[usize],
    floor: f64,
) -> LikelihoodTable {
    let n_cols = lik.n_cols();
    let multipliers = likelihood_multipliers(samples, policy, observed, observed_slots, n_cols);
    let mut out = lik.clone();
    for (&slot, m) in observed_slots.iter().zip(&multipliers) {
        let row = out.row_mut(slot);
        for (v, &f) in row.iter_mut().zip(m) {
            *v = (*v * f).max(floor);
        }
        let max = row.iter().copied().fold(0.0, f64::max);
        row.iter_mut().for_each(|v| *v /= max);
    }
    out
}

/// Forgets all evidence about `slot` (its card was replaced).
pub fn reset_slot(lik: &mut LikelihoodTable, slot: usize) {
    lik.row_mut(slot).fill(1.0);
}
