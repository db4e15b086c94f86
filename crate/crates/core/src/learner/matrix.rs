//! Training and evaluation on the two-step matrix game.
//!
//! Player 1 sees its card and the (uniform) public belief over it. Player 2
//! sees its card, player 1's action and, for BAD, the exact public belief
//! over player 1's card obtained from the publicly sampled partial policy.
//! Vanilla policy gradient gets the same inputs with the belief left at the
//! prior. Each player owns a network; the baseline additionally sees the
//! other player's card.

use serde::{Deserialize, Serialize};

use crate::matrix::{
    mg_exact_public_update, mg_optimal_value, mg_signalling_free_solution, profile_value, ExactBelief, P1Strategy,
    P2Strategy, PayoffTensor, N_ACTIONS, N_CARDS,
};
use crate::nn::{NetSpec, Network};
use crate::optim::Optimizer;
use crate::pubmdp::{LegalFn, PartialPolicy};
use crate::rng::{mix, stream, timestep_seed};

use super::{a2c_losses, policy_forward, Branch, LearnerError, LossStats, Step, TrainConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixMethod {
    /// Bayesian action decoder with exact public beliefs.
    Bad,
    /// Vanilla policy gradient: no public belief.
    Pg,
}

impl std::str::FromStr for MatrixMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bad" => Ok(MatrixMethod::Bad),
            "pg" => Ok(MatrixMethod::Pg),
            other => Err(format!("unknown matrix method {other:?} (expected bad or pg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixConfig {
    /// Payoff tensor JSON, relative to the working directory.
    pub payoff: String,
    pub method: MatrixMethod,
    pub updates: u64,
    pub eval_games: usize,
    /// Updates between evaluations (and metrics rows).
    pub eval_every: u64,
    pub eval_inv_temp: f64,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            payoff: "fixtures/matrix_payoff.json".into(),
            method: MatrixMethod::Bad,
            updates: 50_000,
            eval_games: 1000,
            eval_every: 1000,
            eval_inv_temp: 100.0,
        }
    }
}

impl MatrixConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.updates == 0 || self.eval_games == 0 || self.eval_every == 0 || !(self.eval_inv_temp > 0.0) {
            return Err(LearnerError::InvalidConfig(
                "matrix updates, eval_games, eval_every and eval_inv_temp must be positive".into(),
            ));
        }
        Ok(())
    }
}

const P1_DENSE: usize = N_CARDS;
const P2_DENSE: usize = N_CARDS + N_ACTIONS;
/// Own card one-hot, then the other player's card one-hot (baseline only).
const SPARSE: usize = 2 * N_CARDS;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixAgents {
    pub method: MatrixMethod,
    pub p1: Network,
    pub p2: Network,
}

fn all_legal() -> LegalFn<'static> {
    Box::new(|_: &[u16]| vec![true; N_ACTIONS])
}

fn p2_dense(belief: &ExactBelief, u1: usize) -> Vec<f64> {
    let mut d = belief.0.to_vec();
    d.extend((0..N_ACTIONS).map(|a| if a == u1 { 1.0 } else { 0.0 }));
    d
}

impl MatrixAgents {
    pub fn new(method: MatrixMethod, hidden: &[usize], seed: u64) -> Self {
        let spec = |dense| NetSpec {
            dense_inputs: dense,
            sparse_inputs: SPARSE,
            hidden: hidden.to_vec(),
            n_actions: N_ACTIONS,
        };
        MatrixAgents {
            method,
            p1: Network::init(spec(P1_DENSE), mix(seed, 1)),
            p2: Network::init(spec(P2_DENSE), mix(seed, 2)),
        }
    }

    /// Public belief over card 1 after player 1's partial policy `table`
    /// produced `u1`.
    fn belief_after(&self, table: &[usize; N_CARDS], u1: usize) -> ExactBelief {
        match self.method {
            MatrixMethod::Bad => {
                mg_exact_public_update(&ExactBelief::uniform(), table, u1).unwrap_or_else(|_| ExactBelief::uniform())
            }
            MatrixMethod::Pg => ExactBelief::uniform(),
        }
    }
}

fn table(pi: &PartialPolicy<'_>) -> Result<[usize; N_CARDS], LearnerError> {
    let mut t = [0; N_CARDS];
    for (c, slot) in t.iter_mut().enumerate() {
        *slot = pi.act(&[c as u16])?;
    }
    Ok(t)
}

fn step_for(dense: Vec<f64>, own_card: usize, other_card: usize, t: &[usize; N_CARDS], reward: f64) -> Step {
    Step {
        dense,
        private: vec![own_card],
        own: vec![N_CARDS + other_card],
        legal: vec![true; N_ACTIONS],
        action: t[own_card],
        reward,
        acting: true,
        branches: (0..N_CARDS)
            .map(|c| Branch {
                private: vec![c],
                legal: vec![true; N_ACTIONS],
                action: t[c],
            })
            .collect(),
    }
}

/// Plays one episode. Returns the two single-decision trajectories and the
/// reward.
pub fn matrix_episode(
    agents: &MatrixAgents,
    payoff: &PayoffTensor,
    seed: u64,
    inv_temp: f64,
) -> Result<(Trajectory, Trajectory, f64), LearnerError> {
    let state = crate::matrix::MGState::new(seed);
    let (c1, c2) = (state.card1, state.card2);
    let d1 = ExactBelief::uniform().0.to_vec();
    let pi1 = PartialPolicy::new(&agents.p1, &d1, timestep_seed(seed, 0), inv_temp, N_CARDS, all_legal())?;
    let t1 = table(&pi1)?;
    let u1 = t1[c1];
    let belief = agents.belief_after(&t1, u1);
    let d2 = p2_dense(&belief, u1);
    let pi2 = PartialPolicy::new(&agents.p2, &d2, timestep_seed(seed, 1), inv_temp, N_CARDS, all_legal())?;
    let t2 = table(&pi2)?;
    let u2 = t2[c2];
    let reward = payoff.get(c1, c2, u1, u2);
    let mut tr1 = Trajectory::new(0, 1);
    tr1.steps.push(step_for(d1, c1, c2, &t1, reward));
    let mut tr2 = Trajectory::new(1, 1);
    tr2.steps.push(step_for(d2, c2, c1, &t2, reward));
    Ok((tr1, tr2, reward))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The deterministic profile obtained by taking every argmax.
pub fn greedy_profile(agents: &MatrixAgents) -> (P1Strategy, P2Strategy) {
    let d1 = ExactBelief::uniform().0.to_vec();
    let mut p1 = [0; N_CARDS];
    for (c, a) in p1.iter_mut().enumerate() {
        *a = argmax(&policy_forward(&agents.p1, &d1, &[c]).logits);
    }
    let mut p2 = [[0; N_ACTIONS]; N_CARDS];
    for u1 in 0..N_ACTIONS {
        let d2 = p2_dense(&agents.belief_after(&p1, u1), u1);
        for (c2, row) in p2.iter_mut().enumerate() {
            row[u1] = argmax(&policy_forward(&agents.p2, &d2, &[c2]).logits);
        }
    }
    (p1, p2)
}

/// Exact value of every deterministic player-1 table against player 2's
/// greedy response to it, indexed `[table(0)][table(1)]`.
pub fn p1_table_values(agents: &MatrixAgents, payoff: &PayoffTensor) -> [[f64; N_ACTIONS]; N_ACTIONS] {
    let mut out = [[0.0; N_ACTIONS]; N_ACTIONS];
    for (a0, row) in out.iter_mut().enumerate() {
        for (a1, v) in row.iter_mut().enumerate() {
            let p1 = [a0, a1];
            let mut p2 = [[0; N_ACTIONS]; N_CARDS];
            for u1 in 0..N_ACTIONS {
                let d2 = p2_dense(&agents.belief_after(&p1, u1), u1);
                for (c2, r) in p2.iter_mut().enumerate() {
                    r[u1] = argmax(&policy_forward(&agents.p2, &d2, &[c2]).logits);
                }
            }
            *v = profile_value(payoff, &p1, &p2);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixEval {
    pub games: usize,
    pub mean_reward: f64,
    /// Exact expected reward of the greedy profile.
    pub greedy_value: f64,
}

pub fn evaluate_matrix(
    agents: &MatrixAgents,
    payoff: &PayoffTensor,
    games: usize,
    inv_temp: f64,
    seed: u64,
) -> Result<MatrixEval, LearnerError> {
    let base = mix(seed, stream::EVAL);
    let mut total = 0.0;
    for i in 0..games {
        total += matrix_episode(agents, payoff, mix(base, i as u64), inv_temp)?.2;
    }
    let (p1, p2) = greedy_profile(agents);
    Ok(MatrixEval {
        games,
        mean_reward: total / games as f64,
        greedy_value: profile_value(payoff, &p1, &p2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetricsRow {
    pub update: u64,
    pub train_reward: f64,
    pub eval_reward: f64,
    pub greedy_value: f64,
    pub pg: f64,
    pub baseline: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixTrainOutcome {
    pub agents: MatrixAgents,
    pub final_eval: MatrixEval,
    pub optimal_value: f64,
    pub signalling_free_value: f64,
    /// First evaluation at which the mean reward reached 99% of the optimum.
    pub first_update_at_99: Option<u64>,
    pub updates: u64,
}

pub fn train_matrix(
    payoff: &PayoffTensor,
    train: &TrainConfig,
    mcfg: &MatrixConfig,
    seed: u64,
    mut on_row: impl FnMut(&MatrixMetricsRow, &MatrixAgents) -> Result<(), LearnerError>,
) -> Result<MatrixTrainOutcome, LearnerError> {
    train.validate()?;
    mcfg.validate()?;
    let mut agents = MatrixAgents::new(mcfg.method, &train.hidden, seed);
    let mut o1 = Optimizer::new(train.optimizer, train.clip_norm, agents.p1.params.len());
    let mut o2 = Optimizer::new(train.optimizer, train.clip_norm, agents.p2.params.len());
    let w = train.loss_weights(train.entropy_weight);
    let optimal = mg_optimal_value(payoff);
    let episode_base = mix(seed, stream::EPISODE);
    let mut first_99 = None;
    let mut episode = 0u64;
    let mut acc = (0.0, LossStats::default(), 0usize);
    for update in 1..=mcfg.updates {
        let mut t1 = Vec::with_capacity(train.batch_size);
        let mut t2 = Vec::with_capacity(train.batch_size);
        for _ in 0..train.batch_size {
            let (a, b, r) = matrix_episode(&agents, payoff, mix(episode_base, episode), train.inv_temp)?;
            episode += 1;
            acc.0 += r;
            acc.2 += 1;
            t1.push(a);
            t2.push(b);
        }
        let norm = train.batch_size as f64;
        let mut g1 = vec![0.0; agents.p1.params.len()];
        let mut g2 = vec![0.0; agents.p2.params.len()];
        let s1 = a2c_losses(&agents.p1, &t1, &w, norm, Some(&mut g1));
        let s2 = a2c_losses(&agents.p2, &t2, &w, norm, Some(&mut g2));
        for s in [&s1, &s2] {
            if !s.is_finite() {
                return Err(LearnerError::NonFinite { update, stats: *s });
            }
            acc.1.add(s);
        }
        o1.step(&mut agents.p1.params, &g1, train.learning_rate);
        o2.step(&mut agents.p2.params, &g2, train.learning_rate);
        if update % mcfg.eval_every == 0 || update == mcfg.updates {
            let ev = evaluate_matrix(&agents, payoff, mcfg.eval_games, mcfg.eval_inv_temp, seed)?;
            if first_99.is_none() && ev.mean_reward >= 0.99 * optimal {
                first_99 = Some(update);
            }
            let n = acc.2.max(1) as f64;
            let updates_in_window = (acc.2 / train.batch_size).max(1) as f64;
            on_row(&MatrixMetricsRow {
                update,
                train_reward: acc.0 / n,
                eval_reward: ev.mean_reward,
                greedy_value: ev.greedy_value,
                pg: acc.1.pg / updates_in_window,
                baseline: acc.1.baseline / updates_in_window,
                entropy: acc.1.entropy / updates_in_window,
            }, &agents)?;
            acc = (0.0, LossStats::default(), 0);
        }
    }
    let final_eval = evaluate_matrix(&agents, payoff, mcfg.eval_games, mcfg.eval_inv_temp, seed)?;
    Ok(MatrixTrainOutcome {
        agents,
        final_eval,
        optimal_value: optimal,
        signalling_free_value: mg_signalling_free_solution(payoff).value,
        first_update_at_99: first_99,
        updates: mcfg.updates,
    })
}
