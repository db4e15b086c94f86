use std::collections::BTreeSet;

use super::{BeliefError, FactorisedBelief, LikelihoodTable, SlotTable};
use crate::game::{CardMultiset, HintMask};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub iterations: usize,
    pub converged: bool,
    /// Slots whose update collapsed to all zeros at least once and kept their
    /// previous row instead.
    pub fallback_slots: BTreeSet<usize>,
}

fn check_shapes(candidates: &CardMultiset, mask: &HintMask) -> Result<(), BeliefError> {
    if mask.n_cols() != candidates.len() + 1 {
        return Err(BeliefError::Shape(format!(
            "hint mask has {} columns for {} card types",
            mask.n_cols(),
            candidates.len()
        )));
    }
    Ok(())
}

/// Grounded belief: row `i` proportional to `C(f) * HM(i, f)` (null weighted
/// by its mask bit alone).
pub fn v0_belief(candidates: &CardMultiset, mask: &HintMask) -> Result<FactorisedBelief, BeliefError> {
    check_shapes(candidates, mask)?;
    initial(candidates, mask, None)
}

fn initial(
    candidates: &CardMultiset,
    mask: &HintMask,
    lik: Option<&LikelihoodTable>,
) -> Result<FactorisedBelief, BeliefError> {
    let n_cols = mask.n_cols();
    let null = n_cols - 1;
    let mut out = SlotTable::filled(mask.n_slots(), n_cols, 0.0);
    for slot in 0..mask.n_slots() {
        let row = out.row_mut(slot);
        for (col, w) in row.iter_mut().enumerate() {
            if !mask.get(slot, col) {
                continue;
            }
            let base = if col == null { 1.0 } else { f64::from(candidates.get(col)) };
            *w = base * lik.map_or(1.0, |l| l.get(slot, col));
        }
        normalise(row).map_err(|()| BeliefError::Degenerate { slot })?;
    }
    Ok(out)
}

fn normalise(row: &mut [f64]) -> Result<(), ()> {
    let z: f64 = row.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(());
    }
    row.iter_mut().for_each(|v| *v /= z);
    Ok(())
}

/// Applies `B(i, f) <- max(C(f) - sum_{j != i} B(j, f), 0) * HM(i, f) * L(i, f)`
/// up to `iterations` sweeps, normalising each row. Rows are updated in
/// place in slot order (Gauss-Seidel): a simultaneous update oscillates with
/// period two when slots compete for a card with few copies left.
fn iterate(
    mut belief: FactorisedBelief,
    candidates: &CardMultiset,
    mask: &HintMask,
    lik: Option<&LikelihoodTable>,
    iterations: usize,
    tolerance: f64,
) -> (FactorisedBelief, IterationReport) {
    let n_slots = belief.n_slots();
    let n_cols = belief.n_cols();
    let null = n_cols - 1;
    let mut report = IterationReport::default();
    let mut col_sum = vec![0.0; null];
    for row in belief.rows() {
        for (s, &p) in col_sum.iter_mut().zip(row) {
            *s += p;
        }
    }
    let mut new = vec![0.0; n_cols];
    for _ in 0..iterations {
        let mut max_change: f64 = 0.0;
        for slot in 0..n_slots {
            let old = belief.row(slot);
            for col in 0..n_cols {
                new[col] = if !mask.get(slot, col) {
                    0.0
                } else {
                    let base = if col == null {
                        1.0
                    } else {
                        (f64::from(candidates.get(col)) - (col_sum[col] - old[col])).max(0.0)
                    };
                    base * lik.map_or(1.0, |l| l.get(slot, col))
                };
            }
            if normalise(&mut new).is_err() {
                new.copy_from_slice(old);
                report.fallback_slots.insert(slot);
            }
            for col in 0..n_cols {
                max_change = max_change.max((new[col] - old[col]).abs());
                if col < null {
                    col_sum[col] += new[col] - old[col];
                }
            }
            belief.row_mut(slot).copy_from_slice(&new);
        }
        report.iterations += 1;
        if max_change < tolerance {
            report.converged = true;
            break;
        }
    }
    (belief, report)
}

/// Self-consistent (V1) refinement of `belief`.
pub fn v1_iterate(
    belief: &FactorisedBelief,
    candidates: &CardMultiset,
    mask: &HintMask,
    iterations: usize,
    tolerance: f64,
) -> Result<(FactorisedBelief, IterationReport), BeliefError> {
    check_shapes(candidates, mask)?;
    if belief.n_slots() != mask.n_slots() || belief.n_cols() != mask.n_cols() {
        return Err(BeliefError::Shape("belief and hint mask differ".into()));
    }
    Ok(iterate(belief.clone(), candidates, mask, None, iterations, tolerance))
}

/// Bayesian belief: starts from `C * HM * L` and runs the same
/// self-consistent iteration with the likelihood folded in.
pub fn bb_belief(
    candidates: &CardMultiset,
    mask: &HintMask,
    lik: &LikelihoodTable,
    iterations: usize,
    tolerance: f64,
) -> Result<(FactorisedBelief, IterationReport), BeliefError> {
    check_shapes(candidates, mask)?;
    if lik.n_slots() != mask.n_slots() || lik.n_cols() != mask.n_cols() {
        return Err(BeliefError::Shape("likelihood and hint mask differ".into()));
    }
    let start = initial(candidates, mask, Some(lik))?;
    Ok(iterate(start, candidates, mask, Some(lik), iterations, tolerance))
}

/// `(1 - alpha) * BB + alpha * V1`, row-renormalised.
pub fn v2_belief(
    bb: &FactorisedBelief,
    v1: &FactorisedBelief,
    alpha: f64,
) -> Result<FactorisedBelief, BeliefError> {
    bb.same_shape(v1)?;
    let mut out = bb.clone();
    for (o, &b) in out.values.iter_mut().zip(&v1.values) {
        *o = (1.0 - alpha) * *o + alpha * b;
    }
    for slot in 0..out.n_slots() {
        normalise(out.row_mut(slot)).map_err(|()| BeliefError::Degenerate { slot })?;
    }
    Ok(out)
}
