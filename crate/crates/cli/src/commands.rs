//! Subcommand implementations. Each writes its report to `out`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use maple_core::eval::{ablation_grid, dump_embeddings, embeddings_csv, run_match, AblationSpec, Axis, MatchSpec};
use maple_core::nn::Network;
use maple_core::seeds::{derive_seed, rng_for};
use maple_core::train::{run_training, selfplay_game, TrainingRecord};
use thiserror::Error;

use crate::agents::{load_network, parse_agent, AgentError, NetCache};
use crate::config::{Config, ConfigError};
use crate::server::{self, ServerSettings, IDLE_LIMIT};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Spec(_) => CliError::Config(e.to_string()),
            AgentError::Load { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "maple", version, about = "Imperfect-information tree search for Phantom Go and Dark Hex")]
pub struct Cli {
    /// Overrides train.seed and eval.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Self-play training loop; resumes if OUT already holds a run.
    Train {
        config: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Plays self-play games and prints their records.
    Selfplay {
        config: PathBuf,
        #[arg(short = 'n', default_value_t = 1)]
        games: u32,
        /// Network to play with; a fresh random network when omitted.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plays eval.games colour-alternating games between two agents.
    Evaluate {
        config: PathBuf,
        /// Checkpoint path, `random` or `rollout:<n>`.
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Win rates over a grid of train and evaluation values of k or m.
    Ablate {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
        /// `<train value>=<checkpoint>`, repeatable.
        #[arg(long = "trained", required = true)]
        trained: Vec<String>,
        /// Comma-separated; defaults to 1,5,10 for k and 10,30,50,100 for m.
        #[arg(long, value_delimiter = ',')]
        eval_values: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Anchor, positive and negative embeddings as CSV.
    DumpEmbeddings {
        config: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 50)]
        states: usize,
        #[arg(long, default_value_t = 50)]
        negatives: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP match server for human-vs-agent games.
    Serve {
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<Config, CliError> {
    let mut cfg = Config::load(path).map_err(|e| match e {
        ConfigError::Io { .. } => CliError::Config(e.to_string()),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    if let Some(s) = seed {
        cfg.train.seed = s;
        cfg.eval.seed = s;
    }
    Ok(cfg)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(runtime),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out: dir } => {
            let cfg = load_config(&config, cli.seed)?;
            let summary = run_training(&cfg.train, &dir, &mut |line| eprintln!("{line}")).map_err(|e| match e {
                maple_core::train::TrainError::Config(m) => CliError::Config(m),
                other => runtime(other),
            })?;
            writeln!(out, "steps={} checkpoint={}", summary.steps, summary.final_checkpoint.display()).map_err(runtime)
        }
        Command::Selfplay { config, games, ckpt, out: path } => {
            let cfg = load_config(&config, cli.seed)?;
            let t = &cfg.train;
            let net = match ckpt {
                Some(p) => load_network(&p, &t.game)?,
                None => Arc::new(Network::new_random(t.net_config(), &mut rng_for(t.seed, &[1 << 41]))),
            };
            let mut text = String::new();
            for g in 0..games as u64 {
                let game = selfplay_game(&net, t.game, &t.search, g, derive_seed(t.seed, &[g])).map_err(runtime)?;
                eprintln!("game={g} moves={} decisions={} pv_evals={}", game.moves, game.records.len(), game.pv_evals);
                if g > 0 {
                    text.push('\n');
                }
                text.push_str(&game.stored.record);
            }
            emit(&text, path.as_deref(), out)
        }
        Command::Evaluate { config, a, b } => {
            let cfg = load_config(&config, cli.seed)?;
            let game = cfg.train.game;
            let search = cfg.eval_search();
            let cache = NetCache::default();
            let agent_a = parse_agent(&a, &game, &search, &cache)?;
            let agent_b = parse_agent(&b, &game, &search, &cache)?;
            let r = run_match(&MatchSpec { game, a: agent_a, b: agent_b, games_total: cfg.eval.games, seed: cfg.eval.seed })
                .map_err(runtime)?;
            let (rate, ci) = r.rate_ci().map_err(runtime)?;
            writeln!(
                out,
                "a={a} b={b} games={} wins={} draws={} losses={} rate={rate:.6} ci={ci:.6}",
                r.total(),
                r.wins,
                r.draws,
                r.losses
            )
            .map_err(runtime)
        }
        Command::Ablate { config, axis, trained, eval_values, out: path } => {
            let cfg = load_config(&config, cli.seed)?;
            let game = cfg.train.game;
            let search = cfg.eval_search();
            let cache = NetCache::default();
            let mut nets = Vec::new();
            for t in &trained {
                let (value, ckpt) = t
                    .split_once('=')
                    .and_then(|(v, p)| Some((v.parse::<usize>().ok()?, p)))
                    .ok_or_else(|| CliError::Config(format!("--trained `{t}` is not <value>=<checkpoint>")))?;
                nets.push((value, load_network(Path::new(ckpt), &game)?));
            }
            let opponents = cfg
                .eval
                .opponents
                .iter()
                .map(|o| parse_agent(o, &game, &search, &cache))
                .collect::<Result<Vec<_>, _>>()?;
            if opponents.is_empty() {
                return Err(CliError::Config("eval.opponents is empty".into()));
            }
            let spec = AblationSpec {
                game,
                axis,
                trained: nets,
                eval_values: eval_values.unwrap_or_else(|| axis.default_values()),
                base: search,
                opponents,
                games_per_opponent: cfg.eval.games,
                seed: cfg.eval.seed,
            };
            let grid = ablation_grid(&spec).map_err(runtime)?;
            emit(&grid.to_text(), path.as_deref(), out)
        }
        Command::DumpEmbeddings { config, ckpt, states, negatives, out: path } => {
            let cfg = load_config(&config, cli.seed)?;
            let t = &cfg.train;
            let net = load_network(&ckpt, &t.game)?;
            let mut rng = rng_for(t.seed, &[2]);
            let mut rows = Vec::new();
            let mut game_id = 0u64;
            // Keep playing until enough non-singleton positions are found.
            while rows.len() < states * (2 + negatives) {
                if game_id >= 100 * states.max(1) as u64 {
                    return Err(runtime("self-play produced too few positions with ambiguous information sets"));
                }
                let g = selfplay_game(&net, t.game, &t.search, game_id, derive_seed(t.seed, &[game_id]))
                    .map_err(runtime)?;
                let records: Vec<TrainingRecord> = g.records;
                let offset = rows.last().map_or(0, |r: &maple_core::eval::EmbeddingRow| r.state + 1);
                rows.extend(dump_embeddings(&net, &records, negatives, &mut rng).into_iter().map(|mut r| {
                    r.state += offset;
                    r
                }));
                game_id += 1;
            }
            rows.truncate(states * (2 + negatives));
            emit(&embeddings_csv(&rows), path.as_deref(), out)
        }
        Command::Serve { config, port } => {
            let cfg = load_config(&config, cli.seed)?;
            let settings = ServerSettings {
                game: cfg.train.game,
                search: cfg.eval_search(),
                max_games: cfg.serve.max_games,
                idle_limit: IDLE_LIMIT,
                seed: cfg.eval.seed,
            };
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(server::serve(settings, port.unwrap_or(cfg.serve.port))).map_err(runtime)
        }
    }
}
