//! Bayesian Action Decoder laboratory: a configurable Hanabi engine,
//! factorised public beliefs, seeded partial-policy sampling and an
//! actor-critic trainer, plus an exactly solvable two-step matrix game.

pub mod belief;
pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod game;
pub mod learner;
pub mod matrix;
pub mod nn;
pub mod optim;
pub mod pubmdp;
pub mod rng;

pub use game::{Action, Card, GameConfig, GameError, GameState};
