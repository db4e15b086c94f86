//! Evaluation: score statistics, belief-quality curves, transcripts and
//! their replay, and a descriptive convention statistic.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefConfig;
use crate::game::{Action, GameConfig, GameState};
use crate::learner::{play_episode, AgentPolicy, Episode, EpisodeOptions, LearnerError, TurnRecord, TRANSCRIPT_SCHEMA_VERSION};
use crate::rng::{mix, stream};

/// Seed of evaluation game `i`.
pub fn eval_game_seed(seed: u64, i: usize) -> u64 {
    mix(mix(seed, stream::EVAL), i as u64)
}

/// Belief settings used at evaluation time: the evaluation sample count
/// replaces the training one.
pub fn eval_belief_config(b: &BeliefConfig) -> BeliefConfig {
    BeliefConfig {
        sample_count: b.eval_sample_count,
        ..b.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub n_games: usize,
    pub mean: f64,
    pub sem: f64,
    pub perfect_fraction: f64,
    /// Mean with games that lost every life scored as zero.
    pub strict_mean: f64,
    pub strict_sem: f64,
    /// Games per raw score, index 0..=max_score.
    pub histogram: Vec<usize>,
    pub max_score: u32,
    pub truncated_games: usize,
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

impl ScoreStats {
    /// `games` holds `(raw score, lives exhausted, truncated)` per game.
    pub fn from_games(games: &[(u32, bool, bool)], max_score: u32) -> Self {
        let raw: Vec<f64> = games.iter().map(|g| f64::from(g.0)).collect();
        let strict: Vec<f64> = games.iter().map(|g| if g.1 { 0.0 } else { f64::from(g.0) }).collect();
        let (mean, sem) = mean_sem(&raw);
        let (strict_mean, strict_sem) = mean_sem(&strict);
        let mut histogram = vec![0; max_score as usize + 1];
        for g in games {
            histogram[g.0 as usize] += 1;
        }
        let perfect = games.iter().filter(|g| g.0 == max_score && !g.1).count();
        ScoreStats {
            n_games: games.len(),
            mean,
            sem,
            perfect_fraction: perfect as f64 / games.len().max(1) as f64,
            strict_mean,
            strict_sem,
            histogram,
            max_score,
            truncated_games: games.iter().filter(|g| g.2).count(),
        }
    }

    /// The headline mean under the chosen scoring rule.
    pub fn headline(&self, strict: bool) -> (f64, f64) {
        if strict {
            (self.strict_mean, self.strict_sem)
        } else {
            (self.mean, self.sem)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub stats: ScoreStats,
    /// Order-dependent combination of every game's final state hash.
    pub games_hash: u64,
}

/// Self-play (or mixed-seat) evaluation over `n_games` fresh seeds. `bcfg`
/// is used as given; pass [`eval_belief_config`] for evaluation-time sample
/// counts.
pub fn evaluate(
    c: &GameConfig,
    bcfg: &BeliefConfig,
    seats: &[AgentPolicy<'_>],
    n_games: usize,
    inv_temp: f64,
    max_steps: usize,
    seed: u64,
) -> Result<EvalReport, LearnerError> {
    let opts = EpisodeOptions::evaluation(inv_temp, max_steps);
    let games = (0..n_games)
        .into_par_iter()
        .map(|i| {
            let ep = play_episode(c, bcfg, seats, eval_game_seed(seed, i), &opts)?;
            Ok((ep.raw_score, ep.lives_exhausted, ep.truncated, ep.final_hash))
        })
        .collect::<Result<Vec<_>, LearnerError>>()?;
    let summary: Vec<_> = games.iter().map(|g| (g.0, g.1, g.2)).collect();
    let games_hash = games.iter().fold(0u64, |h, g| mix(h, g.3));
    Ok(EvalReport {
        stats: ScoreStats::from_games(&summary, c.max_score() as u32),
        games_hash,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeRow {
    pub t: usize,
    pub ce_v0: f64,
    pub ce_v1: f64,
    pub ce_v2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefReport {
    /// Per-timestep means over the games still running at `t`.
    pub rows: Vec<CeRow>,
    /// Per game: mean CE over its steps for V0, V1, V2.
    pub per_game: Vec<[f64; 3]>,
}

impl BeliefReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,ce_v0,ce_v1,ce_v2,n\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.6},{:.6},{:.6},{}\n", r.t, r.ce_v0, r.ce_v1, r.ce_v2, r.n));
        }
        s
    }

    /// Mean over games of the per-game mean CE, with its standard error.
    pub fn overall(&self, k: usize) -> (f64, f64) {
        mean_sem(&self.per_game.iter().map(|g| g[k]).collect::<Vec<_>>())
    }

    /// Mean and standard error of the per-game difference `ce[a] - ce[b]`.
    pub fn paired_difference(&self, a: usize, b: usize) -> (f64, f64) {
        mean_sem(&self.per_game.iter().map(|g| g[a] - g[b]).collect::<Vec<_>>())
    }
}

/// Per-timestep cross-entropy of V0, V1 and V2 against the true hands. The
/// likelihood is always tracked, whatever the seats consume.
pub fn belief_quality_report(
    c: &GameConfig,
    bcfg: &BeliefConfig,
    seats: &[AgentPolicy<'_>],
    n_games: usize,
    inv_temp: f64,
    max_steps: usize,
    seed: u64,
) -> Result<BeliefReport, LearnerError> {
    let opts = EpisodeOptions {
        track_v2: true,
        record_ce: true,
        ..EpisodeOptions::evaluation(inv_temp, max_steps)
    };
    let curves = (0..n_games)
        .into_par_iter()
        .map(|i| Ok(play_episode(c, bcfg, seats, eval_game_seed(seed, i), &opts)?.ce))
        .collect::<Result<Vec<_>, LearnerError>>()?;
    let horizon = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut sums = vec![[0.0; 3]; horizon];
    let mut counts = vec![0usize; horizon];
    let mut per_game = Vec::with_capacity(curves.len());
    for curve in &curves {
        let mut g = [0.0; 3];
        for (t, r) in curve.iter().enumerate() {
            for k in 0..3 {
                sums[t][k] += r[k];
                g[k] += r[k];
            }
            counts[t] += 1;
        }
        if !curve.is_empty() {
            per_game.push(g.map(|x| x / curve.len() as f64));
        }
    }
    let rows = (0..horizon)
        .map(|t| {
            let n = counts[t] as f64;
            CeRow {
                t,
                ce_v0: sums[t][0] / n,
                ce_v1: sums[t][1] / n,
                ce_v2: sums[t][2] / n,
                n: counts[t],
            }
        })
        .collect();
    Ok(BeliefReport { rows, per_game })
}

/// Plays `n_games` with full transcripts (beliefs included).
pub fn dump_games(
    c: &GameConfig,
    bcfg: &BeliefConfig,
    seats: &[AgentPolicy<'_>],
    n_games: usize,
    inv_temp: f64,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<Episode>, LearnerError> {
    let opts = EpisodeOptions {
        track_v2: true,
        record_transcript: true,
        transcript_beliefs: true,
        ..EpisodeOptions::evaluation(inv_temp, max_steps)
    };
    (0..n_games)
        .into_par_iter()
        .map(|i| play_episode(c, bcfg, seats, eval_game_seed(seed, i), &opts))
        .collect()
}

pub fn write_transcript(records: &[TurnRecord], mut w: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript(r: impl BufRead) -> Result<Vec<TurnRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TurnRecord = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

/// Checks a transcript's shape: schema version, one seed, consecutive turns,
/// only the last record terminal, belief rows that are distributions.
pub fn validate_transcript(c: &GameConfig, records: &[TurnRecord]) -> Result<(), String> {
    let Some(first) = records.first() else {
        return Err("empty transcript".into());
    };
    for (i, r) in records.iter().enumerate() {
        if r.schema_version != TRANSCRIPT_SCHEMA_VERSION {
            return Err(format!("turn {i}: schema version {}", r.schema_version));
        }
        if r.seed != first.seed || r.turn != i {
            return Err(format!("turn {i}: seed or turn index out of sequence"));
        }
        if r.terminal && i + 1 != records.len() {
            return Err(format!("turn {i}: terminal record before the end"));
        }
        if r.action_index >= c.n_actions() || r.fireworks.len() != c.n_color {
            return Err(format!("turn {i}: field out of range"));
        }
        if let Some(b) = &r.beliefs {
            for rows in [&b.v0, &b.v1, &b.v2] {
                if rows.len() != c.n_slots() {
                    return Err(format!("turn {i}: belief has {} rows", rows.len()));
                }
                for row in rows {
                    let s: f64 = row.iter().sum();
                    if row.len() != c.n_cols() || (s - 1.0).abs() > 1e-4 || row.iter().any(|&v| v < 0.0) {
                        return Err(format!("turn {i}: belief row is not a distribution"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Replays a transcript through a fresh engine, checking every recorded
/// hash, reward and token count. Calls `visit(state_before, record)` on the
/// way.
pub fn replay_transcript(
    c: &GameConfig,
    records: &[TurnRecord],
    mut visit: impl FnMut(&GameState, &TurnRecord),
) -> Result<GameState, String> {
    let seed = records.first().ok_or("empty transcript")?.seed;
    let mut s = GameState::new(c.clone(), seed).map_err(|e| e.to_string())?;
    for r in records {
        if s.state_hash() != r.hash_before {
            return Err(format!("turn {}: state hash before the action differs", r.turn));
        }
        if Action::from_index(r.action_index, c, r.player) != r.action || s.current_player() != r.player {
            return Err(format!("turn {}: action or actor inconsistent", r.turn));
        }
        visit(&s, r);
        let out = s.apply(r.action).map_err(|e| format!("turn {}: {e}", r.turn))?;
        if s.state_hash() != r.hash_after
            || out.reward != r.reward
            || s.score() != r.score
            || s.hint_tokens() != r.hint_tokens
            || s.life_tokens() != r.life_tokens
            || out.terminal != r.terminal
        {
            return Err(format!("turn {}: replayed state differs from the record", r.turn));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConventionStats {
    pub colour_hints: usize,
    /// Colour hints whose recipient's next move played their newest card.
    pub followed_by_newest_play: usize,
    pub fraction: f64,
}

/// How often a colour hint is answered by the hinted partner playing their
/// most recently drawn card. Descriptive only.
pub fn convention_stats(c: &GameConfig, transcripts: &[Vec<TurnRecord>]) -> Result<ConventionStats, String> {
    let mut st = ConventionStats::default();
    for records in transcripts {
        let mut pending: Option<usize> = None;
        replay_transcript(c, records, |s, r| {
            if pending == Some(r.player) {
                if let Action::Play { slot } = r.action {
                    if s.newest_slot(r.player) == Some(slot) {
                        st.followed_by_newest_play += 1;
                    }
                }
            }
            pending = None;
            if let Action::HintColor { target, .. } = r.action {
                st.colour_hints += 1;
                pending = Some(target);
            }
        })?;
    }
    st.fraction = if st.colour_hints == 0 {
        0.0
    } else {
        st.followed_by_newest_play as f64 / st.colour_hints as f64
    };
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Card;

    fn bcfg() -> BeliefConfig {
        BeliefConfig {
            sample_count: 100,
            eval_sample_count: 100,
            ..BeliefConfig::default()
        }
    }

    #[test]
    fn stats_are_consistent_with_histogram() {
        let games = [(25, false, false), (10, true, false), (20, false, true), (25, false, false)];
        let s = ScoreStats::from_games(&games, 25);
        assert_eq!(s.histogram.iter().sum::<usize>(), 4);
        let from_hist: f64 = s.histogram.iter().enumerate().map(|(k, &n)| k as f64 * n as f64).sum::<f64>() / 4.0;
        assert!((from_hist - s.mean).abs() < 1e-9);
        assert_eq!(s.mean, 20.0);
        assert_eq!(s.strict_mean, 17.5);
        assert_eq!(s.perfect_fraction, 0.5);
        assert_eq!(s.truncated_games, 1);
        let sd = (((25.0f64 - 20.0).powi(2) * 2.0 + 100.0 + 0.0) / 3.0).sqrt();
        assert!((s.sem - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn strict_scoring_zeroes_games_without_lives() {
        let s = ScoreStats::from_games(&[(7, true, false)], 25);
        assert_eq!((s.mean, s.strict_mean), (7.0, 0.0));
    }

    /// Deals each colour in rank order, so playing the newest card every
    /// turn completes every firework.
    #[test]
    fn stacked_deck_scripted_play_is_perfect() {
        let c = GameConfig::standard(2);
        let mut ordered = Vec::new();
        for color in 0..5u8 {
            for rank in 1..=5u8 {
                ordered.push(Card::new(color, rank));
            }
        }
        for color in 0..5u8 {
            for (rank, copies) in [(1u8, 2), (2, 1), (3, 1), (4, 1)] {
                for _ in 0..copies {
                    ordered.push(Card::new(color, rank));
                }
            }
        }
        // Player 0 gets the first five cards, player 1 the next five.
        let mut s = GameState::from_ordered_deck(c.clone(), ordered).unwrap();
        let mut needed: Vec<u8> = vec![1; 5];
        while !s.is_terminal() {
            let p = s.current_player();
            let hand = s.hand(p).to_vec();
            let playable = hand
                .iter()
                .position(|card| card.is_some_and(|k| k.rank == needed[k.color as usize]));
            let a = match playable {
                Some(slot) => {
                    let k = hand[slot].unwrap();
                    needed[k.color as usize] += 1;
                    Action::Play { slot }
                }
                None if s.hint_tokens() > 0 => Action::HintRank { target: 1 - p, rank: 1 },
                None => Action::Discard { slot: 0 },
            };
            s.apply(a).unwrap();
            s.check_invariants().unwrap();
        }
        assert_eq!(s.score(), 25);
        let st = ScoreStats::from_games(&[(s.raw_score(), s.life_tokens() == 0, false)], 25);
        assert_eq!(st.perfect_fraction, 1.0);
    }

    #[test]
    fn random_policy_scores_low_on_standard_deck() {
        let c = GameConfig::standard(2);
        let seats = [AgentPolicy::UniformRandom; 2];
        let r = evaluate(&c, &bcfg(), &seats, 1000, 1.0, 200, 1).unwrap();
        assert!(r.stats.mean < 5.0, "{}", r.stats.mean);
        let again = evaluate(&c, &bcfg(), &seats, 1000, 1.0, 200, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn transcripts_replay_and_validate() {
        let c = GameConfig::small(2, 3, 2);
        let seats = [AgentPolicy::UniformRandom; 2];
        let eps = dump_games(&c, &bcfg(), &seats, 20, 1.0, 65, 3).unwrap();
        let mut all = Vec::new();
        for ep in &eps {
            let mut buf = Vec::new();
            write_transcript(&ep.transcript, &mut buf).unwrap();
            let back = read_transcript(&buf[..]).unwrap();
            assert_eq!(back, ep.transcript);
            validate_transcript(&c, &back).unwrap();
            let end = replay_transcript(&c, &back, |_, _| {}).unwrap();
            assert_eq!(end.state_hash(), ep.final_hash);
            all.push(back);
        }
        let st = convention_stats(&c, &all).unwrap();
        assert!(st.followed_by_newest_play <= st.colour_hints);
        // Tampering is caught.
        let mut bad = all[0].clone();
        bad[0].hash_after ^= 1;
        assert!(replay_transcript(&c, &bad, |_, _| {}).is_err());
    }

    #[test]
    fn belief_report_shape_and_t0_equality() {
        let c = GameConfig::small(2, 3, 2);
        let seats = [AgentPolicy::UniformRandom; 2];
        let r = belief_quality_report(&c, &bcfg(), &seats, 30, 1.0, 65, 5).unwrap();
        assert_eq!(r.rows[0].n, 30);
        // Flat likelihood at t = 0.
        assert!((r.rows[0].ce_v2 - r.rows[0].ce_v1).abs() < 1e-12);
        assert!(r.rows.windows(2).all(|w| w[0].n >= w[1].n));
        assert!(r.to_csv().starts_with("t,ce_v0,ce_v1,ce_v2,n\n"));
    }
}
