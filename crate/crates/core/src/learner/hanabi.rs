//! Hanabi self-play rollouts on the public belief MDP and the synchronous
//! population trainer.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{cross_entropy, rounded_rows, BeliefConfig, LikelihoodTable, ObservationPolicy};
use crate::game::{slot_col, Action, GameConfig, GameState};
use crate::nn::{NetSpec, Network};
use crate::optim::Optimizer;
use crate::pubmdp::{
    encode_public, hanabi_legal_fn, inverse_cdf, own_active, own_width, private_active, private_width,
    public_belief_transition, BeliefState, BeliefVariant, LegalFn, PartialPolicy, PubMdpError, PublicLayout,
    TransitionInput,
};
use crate::rng::{hash_words, mix, seeded_rng, stream, timestep_seed, unit_f64};

use super::{a2c_losses, pbt_lite_evolve, EvolveEvent, LearnerError, LossStats, Member, Step, TrainConfig, Trajectory};

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

pub fn hanabi_net_spec(c: &GameConfig, hidden: &[usize]) -> NetSpec {
    NetSpec {
        dense_inputs: PublicLayout::new(c).len,
        sparse_inputs: private_width(c) + own_width(c),
        hidden: hidden.to_vec(),
        n_actions: c.n_actions(),
    }
}

/// Who controls a seat.
#[derive(Debug, Clone, Copy)]
pub enum AgentPolicy<'a> {
    Network { net: &'a Network, belief: BeliefVariant },
    /// Uniform over legal actions, drawn from the same public seed schedule.
    UniformRandom,
}

impl AgentPolicy<'_> {
    fn needs_likelihood(&self) -> bool {
        matches!(self, AgentPolicy::Network { belief, .. } if belief.needs_likelihood())
    }
}

enum Acting<'a> {
    Net(PartialPolicy<'a>),
    Uniform { xi: u64, legal: LegalFn<'a> },
}

impl Acting<'_> {
    fn act(&self, view: &[u16]) -> Result<usize, PubMdpError> {
        match self {
            Acting::Net(p) => p.act(view),
            Acting::Uniform { xi, legal } => {
                let mask = legal(view);
                let n = mask.iter().filter(|&&b| b).count();
                if n == 0 {
                    return Err(PubMdpError::NoLegalAction);
                }
                let p: Vec<f64> = mask.iter().map(|&b| if b { 1.0 / n as f64 } else { 0.0 }).collect();
                Ok(inverse_cdf(&p, &mask, unit_f64(hash_words(mix(*xi, stream::POLICY), view))))
            }
        }
    }
}

impl ObservationPolicy for Acting<'_> {
    fn action_for(&self, view: &[u16]) -> usize {
        self.act(view).expect("partial policy queried on a view with no legal action")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub inv_temp: f64,
    pub max_steps: usize,
    /// Maintain the likelihood table and V2 even when no seat needs them.
    pub track_v2: bool,
    pub record_trajectories: bool,
    /// Cross-entropy of V0, V1 and V2 against the true hands at every step.
    pub record_ce: bool,
    pub record_transcript: bool,
    /// Include rounded belief tables in transcript records.
    pub transcript_beliefs: bool,
}

impl EpisodeOptions {
    pub fn training(inv_temp: f64, max_steps: usize) -> Self {
        EpisodeOptions {
            inv_temp,
            max_steps,
            track_v2: false,
            record_trajectories: true,
            record_ce: false,
            record_transcript: false,
            transcript_beliefs: false,
        }
    }

    pub fn evaluation(inv_temp: f64, max_steps: usize) -> Self {
        EpisodeOptions {
            record_trajectories: false,
            ..Self::training(inv_temp, max_steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptBeliefs {
    pub v0: Vec<Vec<f64>>,
    pub v1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
}

/// One line of a game transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub turn: usize,
    pub player: usize,
    pub action: Action,
    /// Actor-relative action index.
    pub action_index: usize,
    pub reward: u32,
    pub score: u32,
    pub hint_tokens: u8,
    pub life_tokens: u8,
    pub deck_size: usize,
    pub fireworks: Vec<u8>,
    pub hash_before: u64,
    pub hash_after: u64,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beliefs: Option<TranscriptBeliefs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    /// Score under the configured scoring rule.
    pub score: u32,
    pub raw_score: u32,
    pub lives_exhausted: bool,
    pub turns: usize,
    /// Hit `max_steps` before the game ended.
    pub truncated: bool,
    pub final_hash: u64,
    pub trajectories: Vec<Trajectory>,
    /// Per step: cross-entropy of V0, V1, V2 (V2 is NaN when untracked).
    pub ce: Vec<[f64; 3]>,
    pub transcript: Vec<TurnRecord>,
    pub likelihood_skips: usize,
}

impl Episode {
    /// Episode reward: sum of per-step rewards.
    pub fn reward(&self) -> f64 {
        self.trajectories
            .first()
            .map(Trajectory::total_reward)
            .unwrap_or(self.raw_score as f64)
    }
}

fn own_cols(state: &GameState, agent: usize) -> Vec<u16> {
    let c = state.config();
    state.hand(agent).iter().map(|&card| slot_col(card, c) as u16).collect()
}

/// Plays one episode from `seed`. `seats[p]` controls player `p`.
pub fn play_episode(
    c: &GameConfig,
    bcfg: &BeliefConfig,
    seats: &[AgentPolicy<'_>],
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<Episode, LearnerError> {
    if seats.len() != c.n_players {
        return Err(LearnerError::InvalidConfig(format!(
            "{} seat policies for {} players",
            seats.len(),
            c.n_players
        )));
    }
    let track = opts.track_v2 || seats.iter().any(AgentPolicy::needs_likelihood);
    if track && bcfg.sample_count == 0 {
        return Err(LearnerError::InvalidConfig("likelihood tracking needs sample_count > 0".into()));
    }
    let layout = PublicLayout::new(c);
    let n_cols = c.n_cols();
    let noop = c.n_actions() - 1;
    let mut state = GameState::new(c.clone(), seed)?;
    let mut beliefs = BeliefState::initial(c, &state.public_features(), bcfg)?;
    let mut trajs: Vec<Trajectory> = if opts.record_trajectories {
        (0..c.n_players).map(|p| Trajectory::new(p, opts.max_steps)).collect()
    } else {
        Vec::new()
    };
    let mut ce = Vec::new();
    let mut transcript = Vec::new();
    let mut likelihood_skips = 0;
    let mut t = 0;
    while !state.is_terminal() && t < opts.max_steps {
        let f = state.public_features();
        let actor = f.current_player;
        let xi = timestep_seed(seed, t);
        if opts.record_ce {
            let truth = state.true_slots();
            let v2 = if track { cross_entropy(&beliefs.v2, &truth, c) } else { f64::NAN };
            ce.push([cross_entropy(&beliefs.v0, &truth, c), cross_entropy(&beliefs.v1, &truth, c), v2]);
        }
        let dense_for = |agent: usize, variant: BeliefVariant| encode_public(c, &layout, &f, beliefs.rows(variant), agent);
        let actor_dense = match seats[actor] {
            AgentPolicy::Network { belief, .. } => Some(dense_for(actor, belief)),
            AgentPolicy::UniformRandom => None,
        };
        let legal = hanabi_legal_fn(c, &f, actor);
        let acting = match (seats[actor], &actor_dense) {
            (AgentPolicy::Network { net, .. }, Some(d)) => {
                Acting::Net(PartialPolicy::new(net, d, xi, opts.inv_temp, n_cols, legal)?)
            }
            _ => Acting::Uniform { xi, legal },
        };
        let view = state.private_observation(actor).encode(c);
        let a_idx = acting.act(&view)?;
        let action = Action::from_index(a_idx, c, actor);
        let actor_legal = state.legal_mask(actor)?;
        let n_legal = actor_legal.iter().filter(|&&b| b).count();

        if opts.record_trajectories {
            for (p, tr) in trajs.iter_mut().enumerate() {
                let variant = match seats[p] {
                    AgentPolicy::Network { belief, .. } => belief,
                    AgentPolicy::UniformRandom => BeliefVariant::V1,
                };
                let dense = match (&actor_dense, p == actor) {
                    (Some(d), true) => d.clone(),
                    _ => dense_for(p, variant),
                };
                let pview = if p == actor { view.clone() } else { state.private_observation(p).encode(c) };
                let (legal, act) = if p == actor {
                    (actor_legal.clone(), a_idx)
                } else {
                    let mut m = vec![false; c.n_actions()];
                    m[noop] = true;
                    (m, noop)
                };
                tr.steps.push(Step {
                    dense,
                    private: private_active(&pview, n_cols),
                    own: own_active(&own_cols(&state, p), c),
                    legal,
                    action: act,
                    reward: 0.0,
                    acting: p == actor,
                    branches: Vec::new(),
                });
            }
        }

        let hash_before = state.state_hash();
        let out = state.apply(action)?;
        if opts.record_trajectories {
            for tr in &mut trajs {
                tr.steps.last_mut().expect("step just pushed").reward = f64::from(out.reward);
            }
        }
        let after = state.public_features();
        beliefs = if track {
            let (next, report) = public_belief_transition(
                c,
                bcfg,
                &beliefs,
                &TransitionInput {
                    before: &f,
                    after: &after,
                    policy: &acting,
                    observed: a_idx,
                    actor,
                    vacated: out.vacated_slot,
                    // A forced move carries no information.
                    sample_count: if n_legal > 1 { bcfg.sample_count } else { 0 },
                    seed: mix(xi, stream::SAMPLES),
                },
            )?;
            likelihood_skips += usize::from(report.likelihood_skipped);
            next
        } else {
            let flat = LikelihoodTable::filled(c.n_slots(), n_cols, 1.0);
            BeliefState::from_likelihood(flat, &after, bcfg, false)?.0
        };
        if opts.record_transcript {
            transcript.push(TurnRecord {
                schema_version: TRANSCRIPT_SCHEMA_VERSION,
                seed,
                turn: t,
                player: actor,
                action,
                action_index: a_idx,
                reward: out.reward,
                score: state.score(),
                hint_tokens: state.hint_tokens(),
                life_tokens: state.life_tokens(),
                deck_size: state.deck().len(),
                fireworks: state.fireworks().to_vec(),
                hash_before,
                hash_after: state.state_hash(),
                terminal: out.terminal,
                beliefs: opts.transcript_beliefs.then(|| TranscriptBeliefs {
                    v0: rounded_rows(&beliefs.v0),
                    v1: rounded_rows(&beliefs.v1),
                    v2: rounded_rows(&beliefs.v2),
                }),
            });
        }
        t += 1;
    }
    Ok(Episode {
        seed,
        score: state.score(),
        raw_score: state.raw_score(),
        lives_exhausted: state.life_tokens() == 0,
        turns: t,
        truncated: !state.is_terminal(),
        final_hash: state.state_hash(),
        trajectories: trajs,
        ce,
        transcript,
        likelihood_skips,
    })
}

/// Log-uniform draw in `[lo, hi]`.
fn log_uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Member 0 uses the configured hyperparameters; the others draw theirs
/// log-uniformly from the configured ranges.
pub fn init_population(c: &GameConfig, train: &TrainConfig, seed: u64) -> Vec<Member> {
    let spec = hanabi_net_spec(c, &train.hidden);
    let mut rng = seeded_rng(mix(seed, stream::PBT));
    (0..train.population_size)
        .map(|id| {
            let (learning_rate, entropy_weight) = if id == 0 {
                (train.learning_rate, train.entropy_weight)
            } else {
                (
                    log_uniform(&mut rng, train.learning_rate_range),
                    log_uniform(&mut rng, train.entropy_weight_range),
                )
            };
            Member {
                id,
                net: Network::init(spec.clone(), mix(mix(seed, stream::INIT), id as u64)),
                opt: Optimizer::new(train.optimizer, train.clip_norm, spec.n_params()),
                learning_rate,
                entropy_weight,
                rating: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub steps: u64,
    pub member: usize,
    pub mean_score: f64,
    pub pg: f64,
    pub baseline: f64,
    pub entropy: f64,
    pub total: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub entropy_weight: f64,
    pub rating: f64,
    pub ce_v0: f64,
    pub ce_v1: f64,
    pub ce_v2: f64,
}

#[derive(Debug, Clone)]
pub struct HanabiTrainOutcome {
    pub members: Vec<Member>,
    pub steps: u64,
    pub updates: u64,
    pub events: Vec<EvolveEvent>,
}

impl HanabiTrainOutcome {
    /// Index of the highest-rated member.
    pub fn best(&self) -> usize {
        best_member(&self.members)
    }
}

/// Index of the highest-rated member; unrated members rank last.
pub fn best_member(members: &[Member]) -> usize {
    let mut best = 0;
    for (i, m) in members.iter().enumerate() {
        if m.rating.unwrap_or(f64::NEG_INFINITY) > members[best].rating.unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    best
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Self-play training until `total_steps` environment steps have been
/// taken. Each member in turn plays a batch of episodes (in parallel), takes
/// one optimiser step on the summed gradient, and reports a metrics row.
/// `on_update` also sees the population so it can write checkpoints.
pub fn train_hanabi(
    c: &GameConfig,
    bcfg: &BeliefConfig,
    train: &TrainConfig,
    total_steps: u64,
    seed: u64,
    mut members: Vec<Member>,
    mut on_update: impl FnMut(&MetricsRow, &[Member]) -> Result<(), LearnerError>,
) -> Result<HanabiTrainOutcome, LearnerError> {
    train.validate()?;
    let spec = hanabi_net_spec(c, &train.hidden);
    if members.is_empty() || members.iter().any(|m| m.net.spec != spec) {
        return Err(LearnerError::InvalidConfig("population does not match the network spec".into()));
    }
    let opts = EpisodeOptions {
        record_ce: true,
        ..EpisodeOptions::training(train.inv_temp, train.max_steps)
    };
    let episode_base = mix(seed, stream::EPISODE);
    let mut pbt_rng = seeded_rng(mix(seed, stream::PBT ^ 1));
    let warmup = (train.pbt_warmup_fraction * total_steps as f64) as u64;
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut updates = 0u64;
    let mut last_evolve = 0u64;
    let mut events = Vec::new();
    'outer: while steps < total_steps {
        for mi in 0..members.len() {
            if steps >= total_steps {
                break 'outer;
            }
            let m = &members[mi];
            let w = train.loss_weights(m.entropy_weight);
            let seats = vec![
                AgentPolicy::Network {
                    net: &m.net,
                    belief: train.belief_input,
                };
                c.n_players
            ];
            let norm = train.batch_size as f64;
            let results = (0..train.batch_size as u64)
                .into_par_iter()
                .map(|i| {
                    let ep = play_episode(c, bcfg, &seats, mix(episode_base, episodes + i), &opts)?;
                    let mut g = vec![0.0; m.net.params.len()];
                    let stats = a2c_losses(&m.net, &ep.trajectories, &w, norm, Some(&mut g));
                    Ok((ep, stats, g))
                })
                .collect::<Result<Vec<_>, LearnerError>>()?;
            episodes += train.batch_size as u64;
            updates += 1;
            let mut grad = vec![0.0; members[mi].net.params.len()];
            let mut stats = LossStats::default();
            for (_, s, g) in &results {
                stats.add(s);
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            if !stats.is_finite() {
                return Err(LearnerError::NonFinite { update: updates, stats });
            }
            let member = &mut members[mi];
            let lr = member.learning_rate;
            let info = member.opt.step(&mut member.net.params, &grad, lr);
            for (ep, _, _) in &results {
                steps += ep.turns as u64;
                member.observe_episode(ep.reward(), train.rating_ema);
            }
            let ce = |k: usize| mean(results.iter().flat_map(|(ep, _, _)| ep.ce.iter().map(move |r| r[k])));
            let row = MetricsRow {
                update: updates,
                steps,
                member: mi,
                mean_score: mean(results.iter().map(|(ep, _, _)| f64::from(ep.score))),
                pg: stats.pg,
                baseline: stats.baseline,
                entropy: stats.entropy,
                total: stats.total,
                grad_norm: info.grad_norm,
                learning_rate: member.learning_rate,
                entropy_weight: member.entropy_weight,
                rating: member.rating.unwrap_or(f64::NAN),
                ce_v0: ce(0),
                ce_v1: ce(1),
                ce_v2: ce(2),
            };
            on_update(&row, &members)?;
        }
        if members.len() > 1 && steps >= warmup && steps - last_evolve >= train.evolve_interval {
            last_evolve = steps;
            if let Some(ev) = pbt_lite_evolve(&mut members, train.pbt_threshold, &mut pbt_rng) {
                events.push(ev);
            }
        }
    }
    Ok(HanabiTrainOutcome {
        members,
        steps,
        updates,
        events,
    })
}
