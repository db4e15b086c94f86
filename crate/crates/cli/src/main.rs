use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bad_core::checkpoint::{Checkpoint, CheckpointError};
use bad_core::config::RunConfig;
use bad_core::eval::{self, BeliefReport};
use bad_core::learner::{
    best_member, evaluate_matrix, init_population, play_episode, train_hanabi, train_matrix, AgentPolicy, EpisodeOptions,
    MatrixAgents, MatrixMethod, Member,
};
use bad_core::matrix::{PayoffMetadata, PayoffTensor};
use bad_core::nn::Network;
use bad_core::pubmdp::BeliefVariant;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Evaluation games run to the natural end of the game; this cap only
/// guards against an engine bug.
const EVAL_MAX_STEPS: usize = 10_000;

#[derive(Parser)]
#[command(name = "bad", version, about = "Bayesian Action Decoder: training, evaluation and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run config; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train two agents on the two-step matrix game.
    TrainMatrix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cf_gradients: bool,
        /// bad or pg; overrides matrix.method.
        #[arg(long)]
        method: Option<MatrixMethod>,
        /// Overrides matrix.payoff.
        #[arg(long)]
        payoff: Option<PathBuf>,
    },
    /// Self-play training on Hanabi.
    TrainHanabi {
        #[command(flatten)]
        common: Common,
        /// Belief fed to the policy; overrides train.belief_input.
        #[arg(long)]
        belief: Option<BeliefVariant>,
    },
    /// Score statistics for a checkpoint (or the uniform-random policy).
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        games: Option<usize>,
        /// Headline score uses strict scoring.
        #[arg(long)]
        strict: bool,
    },
    /// Per-timestep cross-entropy of V0, V1 and V2 against the true hands.
    BeliefReport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        games: Option<usize>,
    },
    /// JSONL transcripts with beliefs, plus the convention statistic.
    DumpGames {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 10)]
        games: usize,
        /// Write padded training-format rollouts (training temperature,
        /// horizon and sample count) instead of transcripts.
        #[arg(long)]
        trajectories: bool,
    },
    /// Brute-force optimum of a matrix-game payoff tensor.
    Oracle {
        #[arg(long, default_value = "fixtures/matrix_payoff.json")]
        payoff: PathBuf,
        /// Also write `<payoff stem>.meta.json` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct PolicyArgs {
    #[arg(long, required_unless_present = "random")]
    checkpoint: Option<PathBuf>,
    /// Use the uniform-random legal policy instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    random: bool,
    /// Overrides the belief variant stored in the checkpoint.
    #[arg(long)]
    belief: Option<BeliefVariant>,
}

enum Failure {
    Config(String),
    Checkpoint(String),
    Runtime(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (category, msg, code) = match self {
            Failure::Config(m) => ("config", m, 2),
            Failure::Checkpoint(m) => ("checkpoint", m, 3),
            Failure::Runtime(m) => ("runtime", m, 1),
        };
        eprintln!("error[{category}]: {}", msg.replace('\n', " "));
        ExitCode::from(code)
    }
}

fn config_err(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime(e: impl Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn setup(common: &Common) -> Res<RunConfig> {
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(runtime)?;
    }
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(&p.to_string_lossy()).map_err(config_err)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    fs::create_dir_all(&common.out).map_err(runtime)?;
    Ok(cfg)
}

fn banner(command: &str, cfg: &RunConfig, extra: serde_json::Value) -> Res<()> {
    eprintln!("bad {command}: {extra}");
    eprintln!("effective config:\n{}", cfg.effective_json());
    Ok(())
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Res<()> {
    let text = serde_json::to_string_pretty(v).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(runtime)
}

fn run(command: Command) -> Res<()> {
    match command {
        Command::TrainMatrix {
            common,
            cf_gradients,
            method,
            payoff,
        } => {
            let mut cfg = setup(&common)?;
            cfg.train.cf_gradients |= cf_gradients;
            if let Some(m) = method {
                cfg.matrix.method = m;
            }
            if let Some(p) = payoff {
                cfg.matrix.payoff = p.to_string_lossy().into_owned();
            }
            cfg.validate().map_err(config_err)?;
            banner("train-matrix", &cfg, json!({"out": common.out}))?;
            train_matrix_cmd(&cfg, &common.out)
        }
        Command::TrainHanabi { common, belief } => {
            let mut cfg = setup(&common)?;
            if let Some(b) = belief {
                cfg.train.belief_input = b;
            }
            cfg.validate().map_err(config_err)?;
            banner("train-hanabi", &cfg, json!({"out": common.out}))?;
            train_hanabi_cmd(&cfg, &common.out)
        }
        Command::Eval {
            common,
            policy,
            games,
            strict,
        } => {
            let cfg = setup(&common)?;
            let loaded = load_policy(&common, &cfg, &policy)?;
            let games = games.unwrap_or(loaded.cfg.run.eval_games);
            banner(
                "eval",
                &loaded.cfg,
                json!({"checkpoint": policy.checkpoint, "random": policy.random, "games": games, "strict": strict}),
            )?;
            eval_cmd(&loaded, games, strict, &common.out)
        }
        Command::BeliefReport { common, policy, games } => {
            let cfg = setup(&common)?;
            let loaded = load_policy(&common, &cfg, &policy)?;
            let games = games.unwrap_or(1000);
            banner(
                "belief-report",
                &loaded.cfg,
                json!({"checkpoint": policy.checkpoint, "random": policy.random, "games": games}),
            )?;
            let c = &loaded.cfg;
            let seats = loaded.seats();
            let report = eval::belief_quality_report(
                &c.game,
                &eval::eval_belief_config(&c.belief),
                &seats,
                games,
                c.run.eval_inv_temp,
                EVAL_MAX_STEPS,
                c.run.seed,
            )
            .map_err(runtime)?;
            fs::write(common.out.join("belief_report.csv"), report.to_csv()).map_err(runtime)?;
            let summary = belief_summary(&report);
            write_json(&common.out.join("belief_summary.json"), &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?);
            Ok(())
        }
        Command::DumpGames {
            common,
            policy,
            games,
            trajectories,
        } => {
            let cfg = setup(&common)?;
            let loaded = load_policy(&common, &cfg, &policy)?;
            banner(
                "dump-games",
                &loaded.cfg,
                json!({"checkpoint": policy.checkpoint, "random": policy.random, "games": games, "trajectories": trajectories}),
            )?;
            if trajectories {
                trajectories_cmd(&loaded, games, &common.out)
            } else {
                dump_cmd(&loaded, games, &common.out)
            }
        }
        Command::Oracle { payoff, out } => {
            let tensor = PayoffTensor::load(&payoff).map_err(config_err)?;
            let meta = PayoffMetadata::compute(&tensor);
            println!("{}", serde_json::to_string_pretty(&meta).map_err(runtime)?);
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(runtime)?;
                let stem = payoff.file_stem().and_then(|s| s.to_str()).unwrap_or("payoff");
                write_json(&dir.join(format!("{stem}.meta.json")), &meta)?;
            }
            Ok(())
        }
    }
}

fn train_matrix_cmd(cfg: &RunConfig, out: &Path) -> Res<()> {
    let payoff = PayoffTensor::load(&cfg.matrix.payoff).map_err(config_err)?;
    let mut csv = csv::Writer::from_path(out.join("metrics.csv")).map_err(runtime)?;
    let outcome = train_matrix(&payoff, &cfg.train, &cfg.matrix, cfg.run.seed, |row, _| {
        csv.serialize(row).map_err(std::io::Error::other)?;
        Ok(())
    })
    .map_err(runtime)?;
    csv.flush().map_err(runtime)?;
    let ckpt = Checkpoint::from_networks(
        "matrix",
        cfg.matrix_model_hash(),
        json!({"config": cfg, "updates": outcome.updates}),
        &[("p1", &outcome.agents.p1), ("p2", &outcome.agents.p2)],
    );
    ckpt.save(out.join("final.ckpt")).map_err(runtime)?;
    let summary = json!({
        "method": cfg.matrix.method,
        "cf_gradients": cfg.train.cf_gradients,
        "updates": outcome.updates,
        "final_eval": outcome.final_eval,
        "optimal_value": outcome.optimal_value,
        "signalling_free_value": outcome.signalling_free_value,
        "first_update_at_99": outcome.first_update_at_99,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?);
    Ok(())
}

fn hanabi_checkpoint(cfg: &RunConfig, members: &[Member], steps: u64) -> Checkpoint {
    let best = best_member(members);
    Checkpoint::from_networks(
        "hanabi",
        cfg.hanabi_model_hash(),
        json!({
            "config": cfg,
            "steps": steps,
            "member": members[best].id,
            "learning_rate": members[best].learning_rate,
            "entropy_weight": members[best].entropy_weight,
        }),
        &[("", &members[best].net)],
    )
}

fn train_hanabi_cmd(cfg: &RunConfig, out: &Path) -> Res<()> {
    let members = init_population(&cfg.game, &cfg.train, cfg.run.seed);
    let mut csv = csv::Writer::from_path(out.join("metrics.csv")).map_err(runtime)?;
    let every = cfg.run.checkpoint_every;
    let mut next_ckpt = if every == 0 { u64::MAX } else { every };
    let outcome = train_hanabi(
        &cfg.game,
        &cfg.belief,
        &cfg.train,
        cfg.run.total_steps,
        cfg.run.seed,
        members,
        |row, members| {
            if row.update % cfg.run.log_every == 0 {
                csv.serialize(row).map_err(std::io::Error::other)?;
                csv.flush()?;
            }
            if row.steps >= next_ckpt {
                hanabi_checkpoint(cfg, members, row.steps)
                    .save(out.join(format!("step_{:012}.ckpt", row.steps)))
                    .map_err(std::io::Error::other)?;
                while next_ckpt <= row.steps {
                    next_ckpt += every;
                }
            }
            Ok(())
        },
    )
    .map_err(runtime)?;
    csv.flush().map_err(runtime)?;
    hanabi_checkpoint(cfg, &outcome.members, outcome.steps)
        .save(out.join("final.ckpt"))
        .map_err(runtime)?;
    let summary = json!({
        "steps": outcome.steps,
        "updates": outcome.updates,
        "best_member": outcome.members[outcome.best()].id,
        "evolve_events": outcome.events.len(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?);
    Ok(())
}

enum Agents {
    Random,
    Hanabi(Network, BeliefVariant),
    Matrix(MatrixAgents),
}

struct Loaded {
    cfg: RunConfig,
    agents: Agents,
}

impl Loaded {
    fn seats(&self) -> Vec<AgentPolicy<'_>> {
        let seat = match &self.agents {
            Agents::Hanabi(net, belief) => AgentPolicy::Network { net, belief: *belief },
            _ => AgentPolicy::UniformRandom,
        };
        vec![seat; self.cfg.game.n_players]
    }
}

/// Resolves the policy to run. A checkpoint carries its own run config; an
/// explicit `--config` replaces it but must describe the same network.
fn load_policy(common: &Common, cfg: &RunConfig, p: &PolicyArgs) -> Res<Loaded> {
    let Some(path) = &p.checkpoint else {
        return Ok(Loaded {
            cfg: cfg.clone(),
            agents: Agents::Random,
        });
    };
    let ckpt = Checkpoint::load(path).map_err(|e| match e {
        CheckpointError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Failure::Checkpoint(format!("{} not found", path.display()))
        }
        other => Failure::Checkpoint(format!("{}: {other}", path.display())),
    })?;
    let mut cfg = if common.config.is_some() {
        cfg.clone()
    } else {
        let mut stored: RunConfig = serde_json::from_value(ckpt.header.meta["config"].clone())
            .map_err(|e| Failure::Checkpoint(format!("stored config: {e}")))?;
        if let Some(s) = common.seed {
            stored.run.seed = s;
        }
        stored
    };
    let ckpt_err = |e: CheckpointError| Failure::Checkpoint(e.to_string());
    let agents = match ckpt.header.kind.as_str() {
        "hanabi" => {
            if let Some(b) = p.belief {
                cfg.train.belief_input = b;
            }
            ckpt.check_hash(&cfg.hanabi_model_hash()).map_err(config_err)?;
            Agents::Hanabi(ckpt.network("").map_err(ckpt_err)?, cfg.train.belief_input)
        }
        "matrix" => {
            ckpt.check_hash(&cfg.matrix_model_hash()).map_err(config_err)?;
            let mut a = MatrixAgents::new(cfg.matrix.method, &cfg.train.hidden, 0);
            a.p1 = ckpt.network("p1").map_err(ckpt_err)?;
            a.p2 = ckpt.network("p2").map_err(ckpt_err)?;
            Agents::Matrix(a)
        }
        k => return Err(Failure::Checkpoint(format!("unknown checkpoint kind {k:?}"))),
    };
    Ok(Loaded { cfg, agents })
}

fn eval_cmd(loaded: &Loaded, games: usize, strict: bool, out: &Path) -> Res<()> {
    let c = &loaded.cfg;
    let result = if let Agents::Matrix(agents) = &loaded.agents {
        let payoff = PayoffTensor::load(&c.matrix.payoff).map_err(config_err)?;
        let e = evaluate_matrix(agents, &payoff, games, c.run.eval_inv_temp, c.run.seed).map_err(runtime)?;
        json!({"kind": "matrix", "eval": e})
    } else {
        let seats = loaded.seats();
        let report = eval::evaluate(
            &c.game,
            &eval::eval_belief_config(&c.belief),
            &seats,
            games,
            c.run.eval_inv_temp,
            EVAL_MAX_STEPS,
            c.run.seed,
        )
        .map_err(runtime)?;
        let (mean, sem) = report.stats.headline(strict);
        json!({
            "kind": "hanabi",
            "strict": strict,
            "headline_mean": mean,
            "headline_sem": sem,
            "stats": report.stats,
            "games_hash": format!("{:016x}", report.games_hash),
        })
    };
    write_json(&out.join("eval.json"), &result)?;
    println!("{}", serde_json::to_string_pretty(&result).map_err(runtime)?);
    Ok(())
}

fn belief_summary(r: &BeliefReport) -> serde_json::Value {
    let pair = |(m, s): (f64, f64)| json!({"mean": m, "sem": s});
    json!({
        "games": r.per_game.len(),
        "ce_v0": pair(r.overall(0)),
        "ce_v1": pair(r.overall(1)),
        "ce_v2": pair(r.overall(2)),
        "v1_minus_v0": pair(r.paired_difference(1, 0)),
        "v2_minus_v1": pair(r.paired_difference(2, 1)),
    })
}

fn dump_cmd(loaded: &Loaded, games: usize, out: &Path) -> Res<()> {
    if matches!(loaded.agents, Agents::Matrix(_)) {
        return Err(config_err("dump-games needs a Hanabi checkpoint"));
    }
    let c = &loaded.cfg;
    let seats = loaded.seats();
    let episodes = eval::dump_games(
        &c.game,
        &eval::eval_belief_config(&c.belief),
        &seats,
        games,
        c.run.eval_inv_temp,
        EVAL_MAX_STEPS,
        c.run.seed,
    )
    .map_err(runtime)?;
    let dir = out.join("games");
    fs::create_dir_all(&dir).map_err(runtime)?;
    for (i, ep) in episodes.iter().enumerate() {
        let f = fs::File::create(dir.join(format!("game_{i:05}.jsonl"))).map_err(runtime)?;
        eval::write_transcript(&ep.transcript, BufWriter::new(f)).map_err(runtime)?;
    }
    let transcripts: Vec<_> = episodes.into_iter().map(|e| e.transcript).collect();
    let conv = eval::convention_stats(&c.game, &transcripts).map_err(runtime)?;
    let summary = json!({"games": games, "directory": dir, "convention": conv});
    write_json(&out.join("dump_summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?);
    Ok(())
}

fn trajectories_cmd(loaded: &Loaded, games: usize, out: &Path) -> Res<()> {
    if matches!(loaded.agents, Agents::Matrix(_)) {
        return Err(config_err("dump-games needs a Hanabi checkpoint"));
    }
    let c = &loaded.cfg;
    let seats = loaded.seats();
    let opts = EpisodeOptions::training(c.train.inv_temp, c.train.max_steps);
    let mut w = BufWriter::new(fs::File::create(out.join("trajectories.jsonl")).map_err(runtime)?);
    for i in 0..games {
        let seed = eval::eval_game_seed(c.run.seed, i);
        let ep = play_episode(&c.game, &c.belief, &seats, seed, &opts).map_err(runtime)?;
        let line = json!({"seed": seed, "raw_score": ep.raw_score, "trajectories": ep.trajectories});
        serde_json::to_writer(&mut w, &line).map_err(runtime)?;
        w.write_all(b"\n").map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    eprintln!("wrote {games} episodes to {}", out.join("trajectories.jsonl").display());
    Ok(())
}
