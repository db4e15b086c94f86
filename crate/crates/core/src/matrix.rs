//! Two-step, two-card cooperative matrix game.
//!
//! Each player holds one random bit. Player 1 acts first with one of three
//! actions; player 2 sees that action and its own card, then acts. The team
//! receives `payoff[card1][card2][u1][u2]`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix, seeded_rng, stream};

pub const N_CARDS: usize = 2;
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("payoff tensor must have shape 2x2x3x3: {0}")]
    Shape(String),
    #[error("payoff tensor contains a non-finite value")]
    NonFinite,
    #[error("player {player} cannot act at stage {stage:?}")]
    OutOfTurn { player: usize, stage: Stage },
    #[error("action {0} is outside 0..3")]
    InvalidAction(usize),
    #[error("observed action {observed} has zero probability under the partial policy and prior")]
    Inconsistent { observed: usize },
    #[error("cannot read payoff file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse payoff file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Payoffs indexed `[card1][card2][u1][u2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<Vec<f64>>>>", into = "Vec<Vec<Vec<Vec<f64>>>>")]
pub struct PayoffTensor {
    values: [[[[f64; N_ACTIONS]; N_ACTIONS]; N_CARDS]; N_CARDS],
}

impl TryFrom<Vec<Vec<Vec<Vec<f64>>>>> for PayoffTensor {
    type Error = MatrixError;

    fn try_from(nested: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self, Self::Error> {
        let mut values = [[[[0.0; N_ACTIONS]; N_ACTIONS]; N_CARDS]; N_CARDS];
        if nested.len() != N_CARDS {
            return Err(MatrixError::Shape(format!("outer length {}", nested.len())));
        }
        for (c1, a) in nested.iter().enumerate() {
            if a.len() != N_CARDS {
                return Err(MatrixError::Shape(format!("[{c1}] has length {}", a.len())));
            }
            for (c2, b) in a.iter().enumerate() {
                if b.len() != N_ACTIONS {
                    return Err(MatrixError::Shape(format!("[{c1}][{c2}] has length {}", b.len())));
                }
                for (u1, row) in b.iter().enumerate() {
                    if row.len() != N_ACTIONS {
                        return Err(MatrixError::Shape(format!(
                            "[{c1}][{c2}][{u1}] has length {}",
                            row.len()
                        )));
                    }
                    for (u2, &v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            return Err(MatrixError::NonFinite);
                        }
                        values[c1][c2][u1][u2] = v;
                    }
                }
            }
        }
        Ok(PayoffTensor { values })
    }
}

impl From<PayoffTensor> for Vec<Vec<Vec<Vec<f64>>>> {
    fn from(t: PayoffTensor) -> Self {
        t.values
            .iter()
            .map(|a| a.iter().map(|b| b.iter().map(|r| r.to_vec()).collect()).collect())
            .collect()
    }
}

impl PayoffTensor {
    pub fn constant(c: f64) -> Self {
        PayoffTensor {
            values: [[[[c; N_ACTIONS]; N_ACTIONS]; N_CARDS]; N_CARDS],
        }
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::constant(0.0);
        for c1 in 0..N_CARDS {
            for c2 in 0..N_CARDS {
                for u1 in 0..N_ACTIONS {
                    for u2 in 0..N_ACTIONS {
                        t.values[c1][c2][u1][u2] = f(c1, c2, u1, u2);
                    }
                }
            }
        }
        t
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MatrixError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    #[inline]
    pub fn get(&self, card1: usize, card2: usize, u1: usize, u2: usize) -> f64 {
        self.values[card1][card2][u1][u2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    P1ToAct,
    P2ToAct,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MGState {
    pub card1: usize,
    pub card2: usize,
    pub stage: Stage,
    pub u1: Option<usize>,
}

impl MGState {
    /// Deals both cards independently and uniformly.
    pub fn new(seed: u64) -> Self {
        let mut rng = seeded_rng(mix(seed, stream::DEAL));
        MGState {
            card1: rng.gen_range(0..N_CARDS),
            card2: rng.gen_range(0..N_CARDS),
            stage: Stage::P1ToAct,
            u1: None,
        }
    }

    pub fn card(&self, player: usize) -> usize {
        if player == 0 {
            self.card1
        } else {
            self.card2
        }
    }

    /// Index (0 or 1) of the player to move, if any.
    pub fn to_act(&self) -> Option<usize> {
        match self.stage {
            Stage::P1ToAct => Some(0),
            Stage::P2ToAct => Some(1),
            Stage::Done => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MGStep {
    pub state: MGState,
    pub reward: Option<f64>,
    pub done: bool,
}

/// Advances the game; the reward arrives with player 2's action.
pub fn mg_step(
    payoff: &PayoffTensor,
    state: &MGState,
    player: usize,
    action: usize,
) -> Result<MGStep, MatrixError> {
    if action >= N_ACTIONS {
        return Err(MatrixError::InvalidAction(action));
    }
    match (state.stage, player) {
        (Stage::P1ToAct, 0) => Ok(MGStep {
            state: MGState {
                stage: Stage::P2ToAct,
                u1: Some(action),
                ..*state
            },
            reward: None,
            done: false,
        }),
        (Stage::P2ToAct, 1) => {
            let u1 = state.u1.expect("u1 recorded before player 2 acts");
            Ok(MGStep {
                state: MGState {
                    stage: Stage::Done,
                    ..*state
                },
                reward: Some(payoff.get(state.card1, state.card2, u1, action)),
                done: true,
            })
        }
        (stage, player) => Err(MatrixError::OutOfTurn { player, stage }),
    }
}

/// Exact belief over one player's card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactBelief(pub [f64; N_CARDS]);

impl ExactBelief {
    pub fn uniform() -> Self {
        ExactBelief([0.5; N_CARDS])
    }

    pub fn point(card: usize) -> Self {
        let mut p = [0.0; N_CARDS];
        p[card] = 1.0;
        ExactBelief(p)
    }

    pub fn probs(&self) -> &[f64; N_CARDS] {
        &self.0
    }
}

/// Public belief update: keeps the cards for which the partial policy would
/// have produced the observed action, then renormalises.
pub fn mg_exact_public_update(
    belief: &ExactBelief,
    partial_policy: &[usize; N_CARDS],
    observed: usize,
) -> Result<ExactBelief, MatrixError> {
    let mut post = [0.0; N_CARDS];
    for (card, p) in post.iter_mut().enumerate() {
        if partial_policy[card] == observed {
            *p = belief.0[card];
        }
    }
    let z: f64 = post.iter().sum();
    if z <= 0.0 {
        return Err(MatrixError::Inconsistent { observed });
    }
    post.iter_mut().for_each(|p| *p /= z);
    Ok(ExactBelief(post))
}

/// Deterministic player-1 strategy: card -> u1.
pub type P1Strategy = [usize; N_CARDS];
/// Deterministic player-2 strategy: (card2, u1) -> u2.
pub type P2Strategy = [[usize; N_ACTIONS]; N_CARDS];

/// Expected team reward of a deterministic profile under uniform cards.
pub fn profile_value(payoff: &PayoffTensor, p1: &P1Strategy, p2: &P2Strategy) -> f64 {
    let mut total = 0.0;
    for c1 in 0..N_CARDS {
        for c2 in 0..N_CARDS {
            let u1 = p1[c1];
            total += payoff.get(c1, c2, u1, p2[c2][u1]);
        }
    }
    total / (N_CARDS * N_CARDS) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub value: f64,
    pub p1: P1Strategy,
    pub p2: P2Strategy,
}

fn all_p1() -> impl Iterator<Item = P1Strategy> {
    (0..N_ACTIONS.pow(N_CARDS as u32)).map(|i| [i % N_ACTIONS, i / N_ACTIONS])
}

fn all_p2() -> impl Iterator<Item = P2Strategy> {
    (0..N_ACTIONS.pow((N_CARDS * N_ACTIONS) as u32)).map(|mut i| {
        let mut s = [[0; N_ACTIONS]; N_CARDS];
        for row in s.iter_mut() {
            for u in row.iter_mut() {
                *u = i % N_ACTIONS;
                i /= N_ACTIONS;
            }
        }
        s
    })
}

fn best_over(payoff: &PayoffTensor, p1s: impl Iterator<Item = P1Strategy>) -> OracleSolution {
    let mut best: Option<OracleSolution> = None;
    for p1 in p1s {
        for p2 in all_p2() {
            let value = profile_value(payoff, &p1, &p2);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(OracleSolution { value, p1, p2 });
            }
        }
    }
    best.expect("strategy sets are non-empty")
}

/// Exhaustive search over all 9 x 729 deterministic profiles.
pub fn mg_optimal_solution(payoff: &PayoffTensor) -> OracleSolution {
    best_over(payoff, all_p1())
}

pub fn mg_optimal_value(payoff: &PayoffTensor) -> f64 {
    mg_optimal_solution(payoff).value
}

/// Best value when player 1 ignores its card (constant strategies only), i.e.
/// the best a team can do without signalling.
pub fn mg_signalling_free_solution(payoff: &PayoffTensor) -> OracleSolution {
    best_over(payoff, (0..N_ACTIONS).map(|u| [u; N_CARDS]))
}

/// Metadata stored next to a payoff fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffMetadata {
    pub optimal_value: f64,
    pub signalling_free_value: f64,
    pub optimal_profile: OracleSolution,
}

impl PayoffMetadata {
    pub fn compute(payoff: &PayoffTensor) -> Self {
        PayoffMetadata {
            optimal_value: mg_optimal_value(payoff),
            signalling_free_value: mg_signalling_free_solution(payoff).value,
            optimal_profile: mg_optimal_solution(payoff),
        }
    }
}
