//! Small fully connected network with a softmax policy head and a scalar
//! value head on a shared ReLU trunk, with hand-written backprop.
//!
//! Inputs are split into a dense block (public features) and a set of active
//! one-hot indices (private view, own hand). Weight matrices are stored
//! input-major, so a one-hot input adds a single contiguous row to the first
//! layer's preactivation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{mix, seeded_rng, stream};

/// Shape of a [`Network`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetSpec {
    pub dense_inputs: usize,
    pub sparse_inputs: usize,
    pub hidden: Vec<usize>,
    pub n_actions: usize,
}

/// Offsets of one named parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl NetSpec {
    pub fn n_inputs(&self) -> usize {
        self.dense_inputs + self.sparse_inputs
    }

    /// Named blocks in storage order: `trunk.{i}.w`, `trunk.{i}.b`, then
    /// `policy.w`, `policy.b`, `value.w`, `value.b`.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        let mut out = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let b = ParamBlock { name, shape, offset };
            offset += b.len();
            out.push(b);
        };
        let mut prev = self.n_inputs();
        for (i, &h) in self.hidden.iter().enumerate() {
            push(format!("trunk.{i}.w"), vec![prev, h]);
            push(format!("trunk.{i}.b"), vec![h]);
            prev = h;
        }
        push("policy.w".into(), vec![prev, self.n_actions]);
        push("policy.b".into(), vec![self.n_actions]);
        push("value.w".into(), vec![prev, 1]);
        push("value.b".into(), vec![1]);
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(ParamBlock::len).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err("network needs at least one non-empty hidden layer".into());
        }
        if self.n_actions == 0 || self.n_inputs() == 0 {
            return Err("network needs inputs and actions".into());
        }
        Ok(())
    }
}

/// Box-Muller standard normal.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Network parameters. Computation is in f64; checkpoints store f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetSpec,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Forward {
    /// Post-ReLU output of every trunk layer.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl Network {
    /// He-style initialisation for the trunk, small policy and value heads,
    /// zero biases.
    pub fn init(spec: NetSpec, seed: u64) -> Self {
        let mut rng = seeded_rng(mix(seed, stream::INIT));
        let mut params = vec![0.0; spec.n_params()];
        for b in spec.blocks() {
            if b.shape.len() != 2 {
                continue;
            }
            let fan_in = b.shape[0] as f64;
            let scale = if b.name.starts_with("trunk") {
                (2.0 / fan_in).sqrt()
            } else {
                0.01 / fan_in.sqrt()
            };
            for p in &mut params[b.range()] {
                *p = normal(&mut rng) * scale;
            }
        }
        Network { spec, params }
    }

    pub fn from_params(spec: NetSpec, params: Vec<f64>) -> Result<Self, String> {
        if params.len() != spec.n_params() {
            return Err(format!("expected {} parameters, got {}", spec.n_params(), params.len()));
        }
        Ok(Network { spec, params })
    }

    fn first_width(&self) -> usize {
        self.spec.hidden[0]
    }

    /// First-layer preactivation from the dense block alone (bias included).
    /// Reused across every private view evaluated for the same public input.
    pub fn dense_preactivation(&self, dense: &[f64]) -> Vec<f64> {
        debug_assert_eq!(dense.len(), self.spec.dense_inputs);
        let h = self.first_width();
        let w_len = self.spec.n_inputs() * h;
        let mut pre = self.params[w_len..w_len + h].to_vec();
        for (i, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                let row = &self.params[i * h..(i + 1) * h];
                for (p, &w) in pre.iter_mut().zip(row) {
                    *p += x * w;
                }
            }
        }
        pre
    }

    /// Full forward pass given the dense preactivation and active one-hot
    /// indices (relative to the start of the sparse block).
    pub fn forward(&self, dense_pre: &[f64], active: &[usize]) -> Forward {
        let spec = &self.spec;
        let h0 = self.first_width();
        let mut x = dense_pre.to_vec();
        for &a in active {
            let r = spec.dense_inputs + a;
            for (p, &w) in x.iter_mut().zip(&self.params[r * h0..(r + 1) * h0]) {
                *p += w;
            }
        }
        relu(&mut x);
        let mut hidden = Vec::with_capacity(spec.hidden.len());
        let mut offset = spec.n_inputs() * h0 + h0;
        let mut prev = h0;
        for &h in &spec.hidden[1..] {
            let w = &self.params[offset..offset + prev * h];
            let mut y = self.params[offset + prev * h..offset + prev * h + h].to_vec();
            affine_acc(&x, w, &mut y);
            relu(&mut y);
            hidden.push(std::mem::replace(&mut x, y));
            offset += prev * h + h;
            prev = h;
        }
        let na = spec.n_actions;
        let pw = &self.params[offset..offset + prev * na];
        let mut logits = self.params[offset + prev * na..offset + prev * na + na].to_vec();
        affine_acc(&x, pw, &mut logits);
        offset += prev * na + na;
        let vw = &self.params[offset..offset + prev];
        let value = self.params[offset + prev] + x.iter().zip(vw).map(|(a, b)| a * b).sum::<f64>();
        hidden.push(x);
        Forward {
            hidden,
            logits,
            value,
        }
    }

    /// Convenience: forward pass from scratch.
    pub fn forward_full(&self, dense: &[f64], active: &[usize]) -> Forward {
        self.forward(&self.dense_preactivation(dense), active)
    }

    /// Accumulates into `grad` the gradient of a loss whose derivatives with
    /// respect to the logits and the value are `d_logits` and `d_value`.
    pub fn backward(
        &self,
        grad: &mut [f64],
        dense: &[f64],
        active: &[usize],
        fwd: &Forward,
        d_logits: &[f64],
        d_value: f64,
    ) {
        let spec = &self.spec;
        let n_layers = spec.hidden.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        let mut prev = spec.n_inputs();
        for &h in &spec.hidden {
            offsets.push((offset, prev, h));
            offset += prev * h + h;
            prev = h;
        }
        let top = &fwd.hidden[n_layers - 1];
        let na = spec.n_actions;
        // Heads.
        let mut d_x = vec![0.0; prev];
        {
            let (w, rest) = grad[offset..].split_at_mut(prev * na);
            for (i, &xi) in top.iter().enumerate() {
                if xi != 0.0 {
                    for (g, &d) in w[i * na..(i + 1) * na].iter_mut().zip(d_logits) {
                        *g += xi * d;
                    }
                }
            }
            for (g, &d) in rest[..na].iter_mut().zip(d_logits) {
                *g += d;
            }
            let pw = &self.params[offset..offset + prev * na];
            for (i, dx) in d_x.iter_mut().enumerate() {
                *dx = pw[i * na..(i + 1) * na].iter().zip(d_logits).map(|(a, b)| a * b).sum();
            }
        }
        let v_off = offset + prev * na + na;
        if d_value != 0.0 {
            for (i, &xi) in top.iter().enumerate() {
                grad[v_off + i] += xi * d_value;
                d_x[i] += self.params[v_off + i] * d_value;
            }
            grad[v_off + prev] += d_value;
        }
        // Trunk, top down.
        for l in (0..n_layers).rev() {
            let (off, n_in, n_out) = offsets[l];
            let out = &fwd.hidden[l];
            for (d, &o) in d_x.iter_mut().zip(out) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
            let b_off = off + n_in * n_out;
            for (g, &d) in grad[b_off..b_off + n_out].iter_mut().zip(&d_x) {
                *g += d;
            }
            if l == 0 {
                for (i, &x) in dense.iter().enumerate() {
                    if x != 0.0 {
                        let row = &mut grad[off + i * n_out..off + (i + 1) * n_out];
                        for (g, &d) in row.iter_mut().zip(&d_x) {
                            *g += x * d;
                        }
                    }
                }
                for &a in active {
                    let r = spec.dense_inputs + a;
                    let row = &mut grad[off + r * n_out..off + (r + 1) * n_out];
                    for (g, &d) in row.iter_mut().zip(&d_x) {
                        *g += d;
                    }
                }
            } else {
                let input = &fwd.hidden[l - 1];
                let w = &self.params[off..off + n_in * n_out];
                let mut d_in = vec![0.0; n_in];
                for i in 0..n_in {
                    let row = &w[i * n_out..(i + 1) * n_out];
                    d_in[i] = row.iter().zip(&d_x).map(|(a, b)| a * b).sum();
                    if input[i] != 0.0 {
                        let g = &mut grad[off + i * n_out..off + (i + 1) * n_out];
                        for (gv, &d) in g.iter_mut().zip(&d_x) {
                            *gv += input[i] * d;
                        }
                    }
                }
                d_x = d_in;
            }
        }
    }

    /// Parameters converted to f32 for storage.
    pub fn params_f32(&self) -> Vec<f32> {
        self.params.iter().map(|&p| p as f32).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// `y += x^T W` for input-major `W`.
fn affine_acc(x: &[f64], w: &[f64], y: &mut [f64]) {
    let n = y.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            for (o, &wv) in y.iter_mut().zip(&w[i * n..(i + 1) * n]) {
                *o += xi * wv;
            }
        }
    }
}

/// Softmax of `inv_temp * logits` restricted to `legal`; illegal entries get
/// logit -1e9 first, so their probability underflows to zero.
pub fn masked_softmax(logits: &[f64], legal: &[bool], inv_temp: f64) -> Vec<f64> {
    let z: Vec<f64> = logits
        .iter()
        .zip(legal)
        .map(|(&l, &ok)| if ok { inv_temp * l } else { -1e9 })
        .collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let spec = NetSpec {
            dense_inputs: 3,
            sparse_inputs: 3,
            hidden: vec![8, 8],
            n_actions: 3,
        };
        let mut net = Network::init(spec, 5);
        // Non-zero biases so ReLU kinks are exercised away from zero.
        let mut rng = seeded_rng(11);
        for p in &mut net.params {
            *p += 0.1 * (rng.gen::<f64>() - 0.5);
        }
        net
    }

    #[test]
    fn parameter_count() {
        assert_eq!(tiny().spec.n_params(), 6 * 8 + 8 + 8 * 8 + 8 + 8 * 3 + 3 + 8 + 1);
        assert!(tiny().spec.n_params() <= 200);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = tiny();
        let dense = [0.3, -0.7, 1.1];
        let active = [1usize];
        let d_logits = [0.2, -0.5, 0.9];
        let d_value = -1.3;
        let objective = |n: &Network| {
            let f = n.forward_full(&dense, &active);
            f.logits.iter().zip(&d_logits).map(|(a, b)| a * b).sum::<f64>() + d_value * f.value
        };
        let fwd = net.forward_full(&dense, &active);
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&mut grad, &dense, &active, &fwd, &d_logits, d_value);
        for i in 0..net.params.len() {
            let eps = 1e-6;
            let mut a = net.clone();
            a.params[i] += eps;
            let mut b = net.clone();
            b.params[i] -= eps;
            let fd = (objective(&a) - objective(&b)) / (2.0 * eps);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: fd {fd} analytic {}", grad[i]);
        }
    }

    #[test]
    fn sparse_equals_dense_one_hot() {
        let net = tiny();
        let a = net.forward_full(&[0.5, 0.0, -1.0], &[0, 2]);
        let spec = NetSpec {
            dense_inputs: 6,
            sparse_inputs: 0,
            ..net.spec.clone()
        };
        let dense_net = Network::from_params(spec, net.params.clone()).unwrap();
        let b = dense_net.forward_full(&[0.5, 0.0, -1.0, 1.0, 0.0, 1.0], &[]);
        for (x, y) in a.logits.iter().zip(&b.logits) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn masked_softmax_zeroes_illegal() {
        let p = masked_softmax(&[5.0, 1.0, 3.0], &[false, true, true], 1.0);
        assert!(p[0] < 1e-30);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = masked_softmax(&[5.0, 1.0, 3.0], &[false, true, false], 1.0);
        assert_eq!(q[1], 1.0);
    }

    #[test]
    fn init_is_seeded() {
        let spec = tiny().spec;
        assert_eq!(Network::init(spec.clone(), 1), Network::init(spec.clone(), 1));
        assert_ne!(Network::init(spec.clone(), 1), Network::init(spec, 2));
    }
}
