use rand::Rng;

use super::FactorisedBelief;
use crate::game::CardMultiset;
use crate::rng::{mix, seeded_rng, stream};

/// Joint hand assignments (one column index per slot) with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSamples {
    n_slots: usize,
    hands: Vec<u16>,
    weights: Vec<f64>,
    /// Draws attempted to collect the accepted hands.
    pub attempted: usize,
    /// Hands requested; `len() < requested` means the budget ran out.
    pub requested: usize,
}

impl HandSamples {
    /// Explicitly weighted samples, e.g. a full enumeration.
    pub fn weighted(n_slots: usize, hands: Vec<Vec<u16>>, weights: Vec<f64>) -> Self {
        assert_eq!(hands.len(), weights.len());
        assert!(hands.iter().all(|h| h.len() == n_slots));
        let requested = hands.len();
        HandSamples {
            n_slots,
            hands: hands.concat(),
            weights,
            attempted: requested,
            requested,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when fewer legal hands were found than requested.
    pub fn is_short(&self) -> bool {
        self.len() < self.requested
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn hand(&self, i: usize) -> &[u16] {
        &self.hands[i * self.n_slots..(i + 1) * self.n_slots]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u16], f64)> {
        self.hands
            .chunks(self.n_slots.max(1))
            .zip(self.weights.iter().copied())
    }
}

/// Draws up to `count * oversample` joint hands by sampling every slot
/// independently from its belief row, keeping the first `count` hands whose
/// card-type totals fit within `candidates`. Deterministic in `seed`.
pub fn sample_hands(
    belief: &FactorisedBelief,
    candidates: &CardMultiset,
    count: usize,
    oversample: usize,
    seed: u64,
) -> HandSamples {
    let n_slots = belief.n_slots();
    let n_cols = belief.n_cols();
    let null = n_cols - 1;
    let cdfs: Vec<Vec<f64>> = belief
        .rows()
        .map(|row| {
            let mut acc = 0.0;
            row.iter()
                .map(|&p| {
                    acc += p;
                    acc
                })
                .collect()
        })
        .collect();

    let mut rng = seeded_rng(mix(seed, stream::SAMPLES));
    let budget = count.saturating_mul(oversample);
    let mut hands = Vec::with_capacity(count * n_slots);
    let mut used = vec![0u8; null];
    let mut draw = vec![0u16; n_slots];
    let mut accepted = 0;
    let mut attempted = 0;
    while accepted < count && attempted < budget {
        attempted += 1;
        used.iter_mut().for_each(|u| *u = 0);
        let mut legal = true;
        for (slot, cdf) in cdfs.iter().enumerate() {
            let u = rng.gen::<f64>() * cdf[n_cols - 1];
            let col = cdf.partition_point(|&c| c <= u).min(n_cols - 1);
            draw[slot] = col as u16;
            if col != null {
                used[col] += 1;
                if used[col] > candidates.get(col) {
                    legal = false;
                }
            }
        }
        if legal {
            hands.extend_from_slice(&draw);
            accepted += 1;
        }
    }
    HandSamples {
        n_slots,
        hands,
        weights: vec![1.0; accepted],
        attempted,
        requested: count,
    }
}
