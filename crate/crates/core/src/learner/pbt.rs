use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::Network;
use crate::optim::Optimizer;

/// One population member: weights, optimiser state and its own
/// hyperparameters.
#[derive(Debug, Clone)]
pub struct Member {
    pub id: usize,
    pub net: Network,
    pub opt: Optimizer,
    pub learning_rate: f64,
    pub entropy_weight: f64,
    /// Exponential moving average of episode rewards; `None` before the
    /// first episode.
    pub rating: Option<f64>,
}

impl Member {
    pub fn observe_episode(&mut self, reward: f64, factor: f64) {
        self.rating = Some(match self.rating {
            None => reward,
            Some(r) => (1.0 - factor) * r + factor * reward,
        });
    }
}

/// Record of one copy-and-perturb event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveEvent {
    pub target: usize,
    pub source: usize,
    pub target_rating: f64,
    pub source_rating: f64,
    pub learning_rate: f64,
    pub entropy_weight: f64,
}

const PERTURB: [f64; 2] = [0.8, 1.25];

/// Considers one randomly chosen member for copying: if another randomly
/// chosen member's rating is at least `threshold` higher, the target takes
/// the source's weights, optimiser state and hyperparameters, then scales
/// learning rate and entropy weight by 0.8 or 1.25 each.
pub fn pbt_lite_evolve<R: Rng>(members: &mut [Member], threshold: f64, rng: &mut R) -> Option<EvolveEvent> {
    if members.len() < 2 {
        return None;
    }
    let target = rng.gen_range(0..members.len());
    let mut source = rng.gen_range(0..members.len() - 1);
    if source >= target {
        source += 1;
    }
    let (tr, sr) = (members[target].rating?, members[source].rating?);
    if sr < tr + threshold {
        return None;
    }
    let src = members[source].clone();
    let m = &mut members[target];
    m.net = src.net;
    m.opt = src.opt;
    m.rating = src.rating;
    m.learning_rate = src.learning_rate * PERTURB[rng.gen_range(0..2)];
    m.entropy_weight = src.entropy_weight * PERTURB[rng.gen_range(0..2)];
    Some(EvolveEvent {
        target,
        source,
        target_rating: tr,
        source_rating: sr,
        learning_rate: m.learning_rate,
        entropy_weight: m.entropy_weight,
    })
}
