//! First-order optimisers over flat parameter vectors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// TensorFlow-1 RMSProp: mean square initialised to one, epsilon inside
    /// the square root.
    Rmsprop { decay: f64, momentum: f64, epsilon: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerConfig {
    pub fn rmsprop() -> Self {
        OptimizerConfig::Rmsprop {
            decay: 0.99,
            momentum: 0.0,
            epsilon: 1e-10,
        }
    }

    /// TensorFlow defaults.
    pub fn adam() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            OptimizerConfig::Rmsprop {
                decay,
                momentum,
                epsilon,
            } => (0.0..1.0).contains(&decay) && (0.0..1.0).contains(&momentum) && epsilon > 0.0,
            OptimizerConfig::Adam { beta1, beta2, epsilon } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid optimizer settings {self:?}"))
        }
    }
}

/// Outcome of one [`Optimizer::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
    /// The gradient contained NaN or infinity and the step was skipped.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    /// Clip to this global norm; `None` disables clipping.
    pub clip_norm: Option<f64>,
    slot_a: Vec<f64>,
    slot_b: Vec<f64>,
    pub steps: u64,
    pub skipped_steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, clip_norm: Option<f64>, n_params: usize) -> Self {
        let (a, b) = match config {
            OptimizerConfig::Rmsprop { .. } => (vec![1.0; n_params], vec![0.0; n_params]),
            OptimizerConfig::Adam { .. } => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Optimizer {
            config,
            clip_norm,
            slot_a: a,
            slot_b: b,
            steps: 0,
            skipped_steps: 0,
        }
    }

    /// Applies one descent step on `grad` (gradient of the loss to minimise).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> StepInfo {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.slot_a.len());
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            self.skipped_steps += 1;
            return StepInfo {
                grad_norm: norm,
                clipped: false,
                skipped: true,
            };
        }
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.steps += 1;
        match self.config {
            OptimizerConfig::Rmsprop {
                decay,
                momentum,
                epsilon,
            } => {
                for i in 0..params.len() {
                    let g = grad[i] * scale;
                    let ms = &mut self.slot_a[i];
                    *ms = decay * *ms + (1.0 - decay) * g * g;
                    let upd = lr * g / (*ms + epsilon).sqrt();
                    let mom = &mut self.slot_b[i];
                    *mom = momentum * *mom + upd;
                    params[i] -= *mom;
                }
            }
            OptimizerConfig::Adam { beta1, beta2, epsilon } => {
                let t = self.steps as i32;
                let lr_t = lr * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
                for i in 0..params.len() {
                    let g = grad[i] * scale;
                    let m = &mut self.slot_a[i];
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    let v = &mut self.slot_b[i];
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    params[i] -= lr_t * *m / (v.sqrt() + epsilon);
                }
            }
        }
        StepInfo {
            grad_norm: norm,
            clipped: scale < 1.0,
            skipped: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        for cfg in [OptimizerConfig::rmsprop(), OptimizerConfig::adam()] {
            let mut opt = Optimizer::new(cfg, Some(40.0), 3);
            let mut p = vec![1.0, -2.0, 0.5];
            opt.step(&mut p, &[0.0; 3], 0.1);
            assert_eq!(p, vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn rmsprop_steps_shrink_as_accumulator_grows() {
        let mut opt = Optimizer::new(OptimizerConfig::rmsprop(), None, 1);
        let (lr, g) = (0.01, 5.0);
        let mut p = vec![0.0];
        opt.step(&mut p, &[g], lr);
        let first = -p[0];
        opt.step(&mut p, &[g], lr);
        let second = -p[0] - first;
        assert!(second < first);
        assert!(second < lr * g);
        // ms_1 = 0.99 + 0.01 g^2
        assert!((first - lr * g / (0.99 + 0.01 * g * g + 1e-10f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut opt = Optimizer::new(OptimizerConfig::adam(), None, 2);
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[3.0, -0.2], 0.001);
        assert!((p[0] + 0.001).abs() < 1e-8);
        assert!((p[1] - 0.001).abs() < 1e-8);
    }

    #[test]
    fn clipping_and_skipping() {
        let mut opt = Optimizer::new(OptimizerConfig::rmsprop(), Some(1.0), 2);
        let mut p = vec![0.0, 0.0];
        let info = opt.step(&mut p, &[30.0, 40.0], 0.1);
        assert!(info.clipped);
        assert_eq!(info.grad_norm, 50.0);
        let before = p.clone();
        let info = opt.step(&mut p, &[f64::NAN, 1.0], 0.1);
        assert!(info.skipped);
        assert_eq!(p, before);
        assert_eq!(opt.skipped_steps, 1);
        assert_eq!(opt.steps, 1);
    }
}
