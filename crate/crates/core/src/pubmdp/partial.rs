use crate::belief::ObservationPolicy;
use crate::nn::{masked_softmax, Network};
use crate::rng::{hash_words, mix, stream, unit_f64};

use super::{private_active, PubMdpError};

/// Legality of each action as a function of a (possibly counterfactual)
/// private view.
pub type LegalFn<'a> = Box<dyn Fn(&[u16]) -> Vec<bool> + Send + Sync + 'a>;

/// A deterministic map from private views to actions, realised lazily from
/// network parameters, a public input and a common seed.
///
/// For each view the action is drawn by inverse CDF from
/// `softmax(inv_temp * masked logits)` with a uniform taken from
/// `hash(xi, view)`, so different views use independent streams and the same
/// inputs give the same action on any machine.
pub struct PartialPolicy<'a> {
    net: &'a Network,
    dense_pre: Vec<f64>,
    xi: u64,
    inv_temp: f64,
    n_cols: usize,
    legal: LegalFn<'a>,
}

impl<'a> PartialPolicy<'a> {
    /// `n_cols` is the one-hot width of each view entry.
    pub fn new(
        net: &'a Network,
        dense: &[f64],
        xi: u64,
        inv_temp: f64,
        n_cols: usize,
        legal: LegalFn<'a>,
    ) -> Result<Self, PubMdpError> {
        if !(inv_temp > 0.0 && inv_temp.is_finite()) {
            return Err(PubMdpError::InvalidTemperature(inv_temp));
        }
        Ok(PartialPolicy {
            net,
            dense_pre: net.dense_preactivation(dense),
            xi,
            inv_temp,
            n_cols,
            legal,
        })
    }

    pub fn seed(&self) -> u64 {
        self.xi
    }

    pub fn legal_mask(&self, view: &[u16]) -> Vec<bool> {
        (self.legal)(view)
    }

    /// Raw network logits for `view` (no masking, no temperature).
    pub fn logits(&self, view: &[u16]) -> Vec<f64> {
        self.net
            .forward(&self.dense_pre, &private_active(view, self.n_cols))
            .logits
    }

    /// Action distribution for `view` after masking and temperature.
    pub fn probabilities(&self, view: &[u16]) -> Vec<f64> {
        masked_softmax(&self.logits(view), &self.legal_mask(view), self.inv_temp)
    }

    /// The uniform variate used for `view`.
    pub fn uniform(&self, view: &[u16]) -> f64 {
        unit_f64(hash_words(mix(self.xi, stream::POLICY), view))
    }

    /// The action this partial policy assigns to `view`.
    pub fn act(&self, view: &[u16]) -> Result<usize, PubMdpError> {
        let legal = self.legal_mask(view);
        let n_legal = legal.iter().filter(|&&b| b).count();
        match n_legal {
            0 => Err(PubMdpError::NoLegalAction),
            1 => Ok(legal.iter().position(|&b| b).unwrap()),
            _ => {
                let logits = self.logits(view);
                let p = masked_softmax(&logits, &legal, self.inv_temp);
                Ok(inverse_cdf(&p, &legal, self.uniform(view)))
            }
        }
    }
}

/// First legal index whose cumulative probability exceeds `u`; the last
/// legal index absorbs rounding.
pub fn inverse_cdf(p: &[f64], legal: &[bool], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, (&pi, &ok)) in p.iter().zip(legal).enumerate() {
        if !ok {
            continue;
        }
        acc += pi;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

impl ObservationPolicy for PartialPolicy<'_> {
    fn action_for(&self, view: &[u16]) -> usize {
        // Views sampled from a consistent belief always have a legal action
        // (play and discard depend only on public occupancy).
        self.act(view).expect("partial policy queried on a view with no legal action")
    }
}
