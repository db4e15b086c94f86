//! Advantage actor-critic losses and their analytic gradients.
//!
//! All losses are sums over valid steps divided by `norm` (the number of
//! episodes in the batch). Advantages are treated as constants in the
//! policy-gradient term.

use serde::{Deserialize, Serialize};

use crate::nn::{masked_softmax, Forward, Network};

use super::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma: f64,
    pub baseline_weight: f64,
    pub entropy_weight: f64,
    /// Use the log-probability of the whole sampled partial policy instead
    /// of the executed action (needs recorded branches).
    pub counterfactual: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub pg: f64,
    /// `0.5 * sum (G - V)^2`, before weighting.
    pub baseline: f64,
    /// Summed policy entropy over acting steps.
    pub entropy: f64,
    /// `pg + baseline_weight * baseline - entropy_weight * entropy`.
    pub total: f64,
    pub acting_steps: usize,
    pub steps: usize,
}

impl LossStats {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }

    pub fn add(&mut self, o: &LossStats) {
        self.pg += o.pg;
        self.baseline += o.baseline;
        self.entropy += o.entropy;
        self.total += o.total;
        self.acting_steps += o.acting_steps;
        self.steps += o.steps;
    }
}

/// Baseline pass: own hidden information included.
pub fn baseline_forward(net: &Network, dense: &[f64], private: &[usize], own: &[usize]) -> (Forward, Vec<usize>) {
    let mut active = private.to_vec();
    active.extend_from_slice(own);
    (net.forward_full(dense, &active), active)
}

/// Policy pass: own hidden information absent (zeroed).
pub fn policy_forward(net: &Network, dense: &[f64], private: &[usize]) -> Forward {
    net.forward_full(dense, private)
}

/// `G_t - V(s_t, own)` for every valid step.
pub fn advantages(net: &Network, trajs: &[Trajectory], gamma: f64) -> Vec<Vec<f64>> {
    trajs
        .iter()
        .map(|tr| {
            tr.returns(gamma)
                .iter()
                .zip(&tr.steps)
                .map(|(g, s)| g - baseline_forward(net, &s.dense, &s.private, &s.own).0.value)
                .collect()
        })
        .collect()
}

/// Baseline regression term `0.5 * sum (G - V)^2 / norm`, scaled by
/// `weight` in the gradient.
pub fn baseline_term(net: &Network, trajs: &[Trajectory], gamma: f64, weight: f64, norm: f64, mut grad: Option<&mut [f64]>) -> f64 {
    let mut loss = 0.0;
    for tr in trajs {
        for (g, s) in tr.returns(gamma).iter().zip(&tr.steps) {
            let (fwd, active) = baseline_forward(net, &s.dense, &s.private, &s.own);
            let err = g - fwd.value;
            loss += 0.5 * err * err;
            if let Some(gr) = grad.as_deref_mut() {
                let zeros = vec![0.0; net.spec.n_actions];
                net.backward(gr, &s.dense, &active, &fwd, &zeros, -weight * err / norm);
            }
        }
    }
    loss / norm
}

/// `d(-A log pi(a))/d logits` added into `d`.
fn pg_grad(d: &mut [f64], p: &[f64], action: usize, adv: f64, scale: f64) {
    for (i, (di, &pi)) in d.iter_mut().zip(p).enumerate() {
        let onehot = if i == action { 1.0 } else { 0.0 };
        *di += -adv * (onehot - pi) * scale;
    }
}

/// Policy-gradient and entropy terms with fixed advantages. Returns
/// `(pg_loss, entropy)`, both divided by `norm`; the gradient added is that
/// of `pg_loss - entropy_weight * entropy`.
pub fn policy_terms(
    net: &Network,
    trajs: &[Trajectory],
    adv: &[Vec<f64>],
    w: &LossWeights,
    norm: f64,
    mut grad: Option<&mut [f64]>,
) -> (f64, f64) {
    let mut pg = 0.0;
    let mut ent = 0.0;
    for (tr, adv) in trajs.iter().zip(adv) {
        for (s, &a) in tr.steps.iter().zip(adv) {
            // A single legal action has probability one: zero log-prob,
            // zero entropy, zero gradient.
            if !s.acting || s.n_legal() < 2 {
                continue;
            }
            let fwd = policy_forward(net, &s.dense, &s.private);
            let p = masked_softmax(&fwd.logits, &s.legal, 1.0);
            let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
            ent += h;
            let mut d = vec![0.0; p.len()];
            // d(-beta H)/dz_j = beta * p_j (ln p_j + H)
            for (j, dj) in d.iter_mut().enumerate() {
                if p[j] > 0.0 {
                    *dj += w.entropy_weight * p[j] * (p[j].ln() + h) / norm;
                }
            }
            if w.counterfactual && !s.branches.is_empty() {
                for br in &s.branches {
                    let bf = policy_forward(net, &s.dense, &br.private);
                    let bp = masked_softmax(&bf.logits, &br.legal, 1.0);
                    pg -= a * bp[br.action].ln();
                    if let Some(gr) = grad.as_deref_mut() {
                        let mut bd = vec![0.0; bp.len()];
                        pg_grad(&mut bd, &bp, br.action, a, 1.0 / norm);
                        net.backward(gr, &s.dense, &br.private, &bf, &bd, 0.0);
                    }
                }
            } else {
                pg -= a * p[s.action].ln();
                pg_grad(&mut d, &p, s.action, a, 1.0 / norm);
            }
            if let Some(gr) = grad.as_deref_mut() {
                net.backward(gr, &s.dense, &s.private, &fwd, &d, 0.0);
            }
        }
    }
    (pg / norm, ent / norm)
}

/// Full A2C objective for a batch. Accumulates its gradient into `grad`
/// when given.
pub fn a2c_losses(net: &Network, trajs: &[Trajectory], w: &LossWeights, norm: f64, mut grad: Option<&mut [f64]>) -> LossStats {
    let adv = advantages(net, trajs, w.gamma);
    let (pg, entropy) = policy_terms(net, trajs, &adv, w, norm, grad.as_deref_mut());
    let baseline = baseline_term(net, trajs, w.gamma, w.baseline_weight, norm, grad);
    LossStats {
        pg,
        baseline,
        entropy,
        total: pg + w.baseline_weight * baseline - w.entropy_weight * entropy,
        acting_steps: trajs
            .iter()
            .flat_map(|t| &t.steps)
            .filter(|s| s.acting && s.n_legal() > 1)
            .count(),
        steps: trajs.iter().map(|t| t.steps.len()).sum(),
    }
}

/// Log-probability of a whole partial policy: sum over branches of
/// `ln pi(branch action | public, branch view)`.
pub fn partial_policy_log_prob(net: &Network, dense: &[f64], branches: &[super::Branch]) -> f64 {
    branches
        .iter()
        .map(|b| {
            let f = policy_forward(net, dense, &b.private);
            masked_softmax(&f.logits, &b.legal, 1.0)[b.action].ln()
        })
        .sum()
}
