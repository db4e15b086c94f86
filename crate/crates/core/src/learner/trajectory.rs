use serde::{Deserialize, Serialize};

/// One alternative branch of a sampled partial policy: the action it assigns
/// to some private view (the executed view included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub private: Vec<usize>,
    pub legal: Vec<bool>,
    pub action: usize,
}

/// Everything the loss needs about one agent at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Dense public input.
    pub dense: Vec<f64>,
    /// Active one-hot indices of the private view.
    pub private: Vec<usize>,
    /// Active one-hot indices of the agent's own hidden information; fed to
    /// the baseline only.
    pub own: Vec<usize>,
    pub legal: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    /// False for steps where the agent could only take the no-action.
    pub acting: bool,
    /// The full partial policy over all private views, for counterfactual
    /// gradients (matrix game only; empty otherwise).
    pub branches: Vec<Branch>,
}

impl Step {
    pub fn n_legal(&self) -> usize {
        self.legal.iter().filter(|&&b| b).count()
    }
}

/// Per-agent record of one episode, padded to `horizon` steps. Steps past
/// `steps.len()` are padding and contribute nothing to any loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent: usize,
    pub horizon: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(agent: usize, horizon: usize) -> Self {
        Trajectory {
            agent,
            horizon,
            steps: Vec::new(),
        }
    }

    /// Loss mask over the padded horizon.
    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.horizon).map(|t| t < self.steps.len()).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Discounted returns for the valid steps; the value after the last
    /// valid step is zero.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let mut g = 0.0;
        let mut out = vec![0.0; self.steps.len()];
        for (t, s) in self.steps.iter().enumerate().rev() {
            g = s.reward + gamma * g;
            out[t] = g;
        }
        out
    }

    /// Canonical little-endian serialisation of the full padded horizon.
    /// Padding steps serialise as a single zero byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.agent as u32).to_le_bytes());
        out.extend_from_slice(&(self.horizon as u32).to_le_bytes());
        for t in 0..self.horizon {
            let Some(s) = self.steps.get(t) else {
                out.push(0);
                continue;
            };
            out.push(1);
            out.extend_from_slice(&(s.action as u32).to_le_bytes());
            out.extend_from_slice(&s.reward.to_le_bytes());
            out.push(u8::from(s.acting));
            out.extend(s.legal.iter().map(|&b| u8::from(b)));
            out.extend_from_slice(&(s.dense.len() as u32).to_le_bytes());
            for v in &s.dense {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for idx in [&s.private, &s.own] {
                out.extend_from_slice(&(idx.len() as u32).to_le_bytes());
                for &i in idx {
                    out.extend_from_slice(&(i as u32).to_le_bytes());
                }
            }
        }
        out
    }
}
