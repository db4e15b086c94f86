//! Factorised public beliefs over private card slots.
//!
//! A belief holds one probability row per slot (every hand, player-major) over
//! the card types plus a trailing null column for empty slots. The grounded
//! V0 belief combines candidate counts with the hint mask; V1 iterates it to
//! account for cards held in other slots; BB folds in the per-slot action
//! likelihoods; V2 mixes a little V1 back into BB.

mod likelihood;
mod sampling;
mod update;

pub use likelihood::{likelihood_multipliers, likelihood_update, reset_slot, ObservationPolicy};
pub use sampling::{sample_hands, HandSamples};
pub use update::{bb_belief, v0_belief, v1_iterate, v2_belief, IterationReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{slot_col, Card, GameConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("slot {slot} has no feasible card (all weights zero)")]
    Degenerate { slot: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid belief configuration: {0}")]
    InvalidConfig(String),
}

/// Knobs for belief computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefConfig {
    /// Self-consistency iterations for V1 and BB.
    pub iterations: usize,
    /// Weight of V1 in V2.
    pub v1_mixin: f64,
    /// Accepted hand samples per update during training.
    pub sample_count: usize,
    /// Accepted hand samples per update during evaluation.
    pub eval_sample_count: usize,
    /// Draw `sample_count * oversample_factor` candidate hands.
    pub oversample_factor: usize,
    pub likelihood_floor: f64,
    /// Iterations stop early once no entry moves by more than this.
    pub tolerance: f64,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        BeliefConfig {
            iterations: 100,
            v1_mixin: 0.01,
            sample_count: 3000,
            eval_sample_count: 20_000,
            oversample_factor: 5,
            likelihood_floor: 1e-10,
            tolerance: 1e-9,
        }
    }
}

impl BeliefConfig {
    pub fn validate(&self) -> Result<(), BeliefError> {
        let fail = |m: &str| Err(BeliefError::InvalidConfig(m.to_owned()));
        if self.iterations == 0 || self.sample_count == 0 || self.eval_sample_count == 0 {
            return fail("iterations and sample counts must be positive");
        }
        if self.oversample_factor == 0 {
            return fail("oversample_factor must be positive");
        }
        if !(0.0..=1.0).contains(&self.v1_mixin) {
            return fail("v1_mixin must lie in [0, 1]");
        }
        if !(self.likelihood_floor > 0.0 && self.likelihood_floor < 1.0) {
            return fail("likelihood_floor must lie in (0, 1)");
        }
        if !(self.tolerance >= 0.0) {
            return fail("tolerance must be non-negative");
        }
        Ok(())
    }
}

/// Row-major `n_slots x n_cols` matrix of non-negative reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTable {
    n_cols: usize,
    values: Vec<f64>,
}

impl SlotTable {
    pub fn filled(n_slots: usize, n_cols: usize, value: f64) -> Self {
        SlotTable {
            n_cols,
            values: vec![value; n_slots * n_cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        SlotTable {
            n_cols,
            values: rows.concat(),
        }
    }

    pub fn n_slots(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.values.len() / self.n_cols
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, slot: usize, col: usize) -> f64 {
        self.values[slot * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, slot: usize, col: usize, v: f64) {
        self.values[slot * self.n_cols + col] = v;
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.n_cols..(slot + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.values[slot * self.n_cols..(slot + 1) * self.n_cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_cols)
    }

    fn same_shape(&self, other: &SlotTable) -> Result<(), BeliefError> {
        if self.n_cols != other.n_cols || self.values.len() != other.values.len() {
            return Err(BeliefError::Shape(format!(
                "{}x{} vs {}x{}",
                self.n_slots(),
                self.n_cols,
                other.n_slots(),
                other.n_cols
            )));
        }
        Ok(())
    }
}

/// Per-slot categorical distributions; every row sums to one.
pub type FactorisedBelief = SlotTable;

/// Unnormalised per-slot action likelihoods; each row is rescaled so its
/// maximum is one.
pub type LikelihoodTable = SlotTable;

/// Mean over occupied slots of `-ln p(true card)`, with probabilities floored
/// at 1e-12.
pub fn cross_entropy(belief: &FactorisedBelief, truth: &[Option<Card>], config: &GameConfig) -> f64 {
    let (sum, n) = truth
        .iter()
        .enumerate()
        .filter_map(|(slot, c)| c.map(|c| (slot, c)))
        .fold((0.0, 0usize), |(sum, n), (slot, card)| {
            let p = belief.get(slot, slot_col(Some(card), config)).max(1e-12);
            (sum - p.ln(), n + 1)
        });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Rounds every entry to six decimals for transcripts.
pub fn rounded_rows(table: &SlotTable) -> Vec<Vec<f64>> {
    table
        .rows()
        .map(|r| r.iter().map(|&v| (v * 1e6).round() / 1e6).collect())
        .collect()
}
