//! Self-play generation, replay buffer and the optimization loop.

mod buffer;
mod selfplay;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{ReplayBuffer, StoredDecision, StoredGame};
pub use selfplay::{build_triplet, materialize, selfplay_game, SelfPlayGame, TrainingRecord};

use crate::game::{GameError, GameSpec, RecordError};
use crate::nn::checkpoint::{self, CheckpointError};
use crate::nn::{loss_and_gradients, sgd_step, LossBreakdown, NetConfig, Network, OptimState, TrainingSample};
use crate::search::SearchConfig;
use crate::seeds::{derive_seed, rng_for};

const OPTIMIZER_TAG: u64 = 1 << 40;
const INIT_TAG: u64 = 1 << 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub blocks: usize,
    pub filters: usize,
    pub embed_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub game: GameSpec,
    pub net: NetShape,
    pub search: SearchConfig,
    pub iterations: u32,
    pub games_per_iter: u32,
    pub steps_per_iter: u32,
    pub batch: usize,
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub buffer_games: usize,
    pub seed: u64,
    pub workers: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.game.validate().map_err(|e| e.to_string())?;
        self.search.validate()?;
        let positive = [
            ("train.iterations", self.iterations as usize),
            ("train.games_per_iter", self.games_per_iter as usize),
            ("train.steps_per_iter", self.steps_per_iter as usize),
            ("train.batch", self.batch),
            ("train.buffer_games", self.buffer_games),
            ("train.workers", self.workers),
            ("net.blocks", self.net.blocks),
            ("net.filters", self.net.filters),
            ("net.embed_dim", self.net.embed_dim),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(format!("{key} must be positive"));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err("train.lr must be positive".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err("train.momentum must lie in [0, 1)".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err("train.weight_decay must be non-negative".into());
        }
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig::for_game(&self.game, self.net.blocks, self.net.filters, self.net.embed_dim)
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {message}")]
    State { path: PathBuf, message: String },
    #[error("self-play: {0}")]
    Game(#[from] GameError),
    #[error("replay buffer: {0}")]
    Record(#[from] RecordError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

/// Per-iteration summary; one metrics-file line each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub games: u64,
    pub steps: u64,
    pub loss: LossMeans,
    pub buffer_games: usize,
    pub avg_len: f64,
    pub pv_evals_per_move: f64,
    pub triplet_skip: f64,
    pub forfeits: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossMeans {
    pub total: f64,
    pub value: f64,
    pub policy: f64,
    pub triplet: f64,
    pub l2: f64,
}

impl IterationMetrics {
    pub fn line(&self) -> String {
        let mut s = String::new();
        let l = &self.loss;
        let _ = write!(
            s,
            "iter={} games={} steps={} loss={:.8} v_loss={:.8} p_loss={:.8} tri_loss={:.8} l2={:.8} buf={} avg_len={:.4} pv_evals_per_move={:.4} tri_skip={:.4}",
            self.iteration,
            self.games,
            self.steps,
            l.total,
            l.value,
            l.policy,
            l.triplet,
            l.l2,
            self.buffer_games,
            self.avg_len,
            self.pv_evals_per_move,
            self.triplet_skip,
        );
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainState {
    iteration: u32,
    step: u64,
    games: u64,
    checkpoint: String,
    config: TrainConfig,
}

pub const METRICS_FILE: &str = "metrics.txt";
pub const STATE_FILE: &str = "state.json";
pub const BUFFER_FILE: &str = "buffer.json";

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step}.maplenet")
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub final_checkpoint: PathBuf,
    pub steps: u64,
    pub metrics: Vec<IterationMetrics>,
}

/// Converts buffer draws into a loss batch, drawing triplet negatives from
/// `rng`.
pub fn make_batch<R: rand::Rng + ?Sized>(records: &[&TrainingRecord], rng: &mut R) -> Vec<TrainingSample> {
    records.iter().map(|r| r.to_sample(rng)).collect()
}

/// Runs (or resumes) training in `out_dir`. `log` receives each metrics
/// line as it is written.
pub fn run_training(
    cfg: &TrainConfig,
    out_dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<TrainSummary, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| TrainError::Config(format!("train.workers: {e}")))?;
    let net_cfg = cfg.net_config();
    let state_path = out_dir.join(STATE_FILE);
    let metrics_path = out_dir.join(METRICS_FILE);
    let buffer_path = out_dir.join(BUFFER_FILE);

    let mut buffer = ReplayBuffer::new(cfg.buffer_games);
    let (mut net, mut opt, mut state) = if state_path.exists() {
        let text = fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
        let state: TrainState = serde_json::from_str(&text)
            .map_err(|e| TrainError::State { path: state_path.clone(), message: e.to_string() })?;
        if state.config.game != cfg.game || state.config.net != cfg.net || state.config.seed != cfg.seed {
            return Err(TrainError::State {
                path: state_path.clone(),
                message: "run was started with a different game, network shape or seed".into(),
            });
        }
        let ckpt = checkpoint::load(&out_dir.join(&state.checkpoint))?;
        let opt = ckpt.optimizer.unwrap_or_else(|| OptimState::new(cfg.lr, cfg.momentum, cfg.weight_decay, ckpt.network.params()));
        if buffer_path.exists() {
            let text = fs::read_to_string(&buffer_path).map_err(io_err(&buffer_path))?;
            let games: Vec<StoredGame> = serde_json::from_str(&text)
                .map_err(|e| TrainError::State { path: buffer_path.clone(), message: e.to_string() })?;
            for g in games {
                buffer.push_stored(g)?;
            }
        }
        let kept: Vec<String> = fs::read_to_string(&metrics_path)
            .unwrap_or_default()
            .lines()
            .take(state.iteration as usize)
            .map(|l| format!("{l}\n"))
            .collect();
        fs::write(&metrics_path, kept.concat()).map_err(io_err(&metrics_path))?;
        (ckpt.network, opt, state)
    } else {
        let net = Network::new_random(net_cfg, &mut rng_for(cfg.seed, &[INIT_TAG]));
        let opt = OptimState::new(cfg.lr, cfg.momentum, cfg.weight_decay, net.params());
        let name = checkpoint_name(0);
        checkpoint::save(&out_dir.join(&name), &net, Some(&opt))?;
        fs::write(&metrics_path, "").map_err(io_err(&metrics_path))?;
        let state = TrainState { iteration: 0, step: 0, games: 0, checkpoint: name, config: cfg.clone() };
        (net, opt, state)
    };
    opt.lr = cfg.lr;
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;

    let mut all_metrics = Vec::new();
    while state.iteration < cfg.iterations {
        let iteration = state.iteration + 1;
        let snapshot = Arc::new(net.clone());
        let games: Vec<SelfPlayGame> = pool.install(|| {
            (0..cfg.games_per_iter as u64)
                .into_par_iter()
                .map(|g| {
                    let id = state.games + g;
                    selfplay_game(&snapshot, cfg.game, &cfg.search, id, derive_seed(cfg.seed, &[iteration as u64, g]))
                })
                .collect::<Result<_, _>>()
        })?;
        let moves: u64 = games.iter().map(|g| g.moves as u64).sum();
        let searches: u64 = games.iter().map(|g| g.searches).sum();
        let pv_evals: u64 = games.iter().map(|g| g.pv_evals).sum();
        let forfeits = games.iter().filter(|g| g.forfeited).count() as u64;
        let n_games = games.len() as u64;
        for g in games {
            buffer.push(g);
        }
        state.games += n_games;

        let mut rng = rng_for(cfg.seed, &[iteration as u64, OPTIMIZER_TAG]);
        let mut sums = LossMeans::default();
        let (mut samples, mut triplets) = (0usize, 0usize);
        let wd = cfg.weight_decay as f64;
        let layout = net.layout().clone();
        for _ in 0..cfg.steps_per_iter {
            let draws = buffer.sample(cfg.batch, &mut rng);
            if draws.is_empty() {
                break;
            }
            let records: Vec<&TrainingRecord> = draws.iter().map(|d| d.1).collect();
            let batch = make_batch(&records, &mut rng);
            let (loss, grads): (LossBreakdown, _) =
                pool.install(|| loss_and_gradients::<f32>(&net_cfg, &layout, net.params(), &batch, wd));
            sgd_step(net.params_mut(), &grads, &mut opt);
            sums.total += loss.total;
            sums.value += loss.value;
            sums.policy += loss.policy;
            sums.triplet += loss.triplet;
            sums.l2 += loss.l2;
            samples += loss.samples;
            triplets += loss.triplets;
            state.step += 1;
        }
        let steps = cfg.steps_per_iter.max(1) as f64;
        let metrics = IterationMetrics {
            iteration,
            games: n_games,
            steps: state.step,
            loss: LossMeans {
                total: sums.total / steps,
                value: sums.value / steps,
                policy: sums.policy / steps,
                triplet: sums.triplet / steps,
                l2: sums.l2 / steps,
            },
            buffer_games: buffer.len(),
            avg_len: moves as f64 / n_games as f64,
            pv_evals_per_move: if searches == 0 { 0.0 } else { pv_evals as f64 / searches as f64 },
            triplet_skip: if samples == 0 { 0.0 } else { 1.0 - triplets as f64 / samples as f64 },
            forfeits,
        };
        let line = metrics.line();
        let mut metrics_text = fs::read_to_string(&metrics_path).map_err(io_err(&metrics_path))?;
        metrics_text.push_str(&line);
        metrics_text.push('\n');
        fs::write(&metrics_path, metrics_text).map_err(io_err(&metrics_path))?;
        log(&line);

        let name = checkpoint_name(state.step);
        checkpoint::save(&out_dir.join(&name), &net, Some(&opt))?;
        let stored: Vec<&StoredGame> = buffer.stored();
        let json = serde_json::to_string(&stored).expect("buffer serializes");
        fs::write(&buffer_path, json).map_err(io_err(&buffer_path))?;
        state.iteration = iteration;
        state.checkpoint = name;
        let tmp = out_dir.join(format!("{STATE_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(&state).expect("state serializes")).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &state_path).map_err(io_err(&state_path))?;
        all_metrics.push(metrics);
    }
    Ok(TrainSummary { final_checkpoint: out_dir.join(&state.checkpoint), steps: state.step, metrics: all_metrics })
}
