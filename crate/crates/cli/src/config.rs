//! Line-based `key = value` configuration files.
//!
//! Keys are dotted (`search.k = 5`); a `[search]` line sets the prefix for
//! the keys that follow it. `#` starts a comment. Unknown or repeated keys
//! are errors. `profile = desk|paper` picks the defaults and, when present,
//! must come before every other key.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use maple_core::game::{GameKind, GameSpec};
use maple_core::nn::EMBED_DIM;
use maple_core::search::{Algorithm, SamplerKind, SearchConfig};
use maple_core::train::{NetShape, TrainConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    /// Board sizes, networks and budgets that fit a desktop CPU.
    #[default]
    Desk,
    /// The full-scale training hyperparameters.
    Paper,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk or paper)")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSection {
    /// Games per pairing; must be even.
    pub games: u32,
    /// Opponent specs: `random`, `rollout:<n>` or a checkpoint path.
    pub opponents: Vec<String>,
    pub seed: u64,
    /// Simulations per move for search agents under evaluation.
    pub simulations: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServeSection {
    pub port: u16,
    pub max_games: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub profile: Profile,
    /// Game, network, self-play search and optimizer settings.
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub serve: ServeSection,
}

fn default_size(profile: Profile, kind: GameKind) -> usize {
    match (profile, kind) {
        (Profile::Desk, GameKind::DarkHex) => 3,
        (Profile::Desk, GameKind::PhantomGo) => 5,
        (Profile::Paper, GameKind::DarkHex) => 11,
        (Profile::Paper, GameKind::PhantomGo) => 9,
    }
}

impl Config {
    pub fn defaults(profile: Profile) -> Config {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let game = GameSpec::dark_hex(default_size(profile, GameKind::DarkHex));
        let train = match profile {
            Profile::Desk => TrainConfig {
                game,
                net: NetShape { blocks: 1, filters: 16, embed_dim: EMBED_DIM },
                search: SearchConfig { k: 3, m: 10, ..SearchConfig::default() },
                iterations: 20,
                games_per_iter: 50,
                steps_per_iter: 50,
                batch: 64,
                lr: 0.02,
                momentum: 0.9,
                weight_decay: 1e-4,
                buffer_games: 500,
                seed: 0,
                workers,
            },
            Profile::Paper => TrainConfig {
                game,
                net: NetShape { blocks: 3, filters: 256, embed_dim: EMBED_DIM },
                search: SearchConfig::default(),
                iterations: 200,
                games_per_iter: 1000,
                steps_per_iter: 200,
                batch: 1024,
                lr: 0.02,
                momentum: 0.9,
                weight_decay: 1e-4,
                buffer_games: 20_000,
                seed: 0,
                workers,
            },
        };
        Config {
            profile,
            train,
            eval: EvalSection {
                games: if profile == Profile::Desk { 200 } else { 250 },
                opponents: vec!["random".into(), "rollout:50".into(), "rollout:400".into()],
                seed: 0,
                simulations: 100,
            },
            serve: ServeSection { port: 8080, max_games: 64 },
        }
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        text.parse()
    }

    /// Search settings for an agent under evaluation: noise off and the
    /// evaluation simulation budget.
    pub fn eval_search(&self) -> SearchConfig {
        SearchConfig { simulations: self.eval.simulations, noise_eps: 0.0, ..self.train.search.clone() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(ConfigError::Invalid)?;
        if self.eval.games == 0 || !self.eval.games.is_multiple_of(2) {
            return Err(ConfigError::Invalid(format!("eval.games must be even and positive, got {}", self.eval.games)));
        }
        if self.eval.simulations == 0 {
            return Err(ConfigError::Invalid("eval.simulations must be at least 1".into()));
        }
        if self.serve.max_games == 0 {
            return Err(ConfigError::Invalid("serve.max_games must be at least 1".into()));
        }
        Ok(())
    }
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("unterminated section `{content}`") })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, message: "empty key".into() });
        }
        let key = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value)
            .to_string();
        if out.iter().any(|e| e.key == key) {
            return Err(ConfigError::Duplicate { line, key });
        }
        out.push(Entry { line, key, value });
    }
    Ok(out)
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    e.value
        .parse()
        .map_err(|err: T::Err| ConfigError::Value { line: e.line, key: e.key.clone(), message: err.to_string() })
}

fn parse_enum<T>(e: &Entry, options: &[(&str, T)]) -> Result<T, ConfigError>
where
    T: Copy,
{
    options.iter().find(|(name, _)| *name == e.value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        ConfigError::Value {
            line: e.line,
            key: e.key.clone(),
            message: format!("`{}` is not one of {}", e.value, names.join(", ")),
        }
    })
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let entries = entries(text)?;
        let profile = match entries.iter().position(|e| e.key == "profile") {
            Some(0) => parse_value(&entries[0])?,
            Some(i) => {
                return Err(ConfigError::Syntax {
                    line: entries[i].line,
                    message: "`profile` must be the first key".into(),
                })
            }
            None => Profile::Desk,
        };
        let mut cfg = Config::defaults(profile);
        let mut size = None;
        let mut komi = None;
        for e in entries.iter().filter(|e| e.key != "profile") {
            let t = &mut cfg.train;
            match e.key.as_str() {
                "game.name" => t.game.kind = parse_value(e).map_err(|_| ConfigError::Value {
                    line: e.line,
                    key: e.key.clone(),
                    message: format!("unknown game `{}` (expected darkhex or phantomgo)", e.value),
                })?,
                "game.size" => size = Some((e.line, parse_value::<usize>(e)?)),
                "game.komi" => komi = Some((e.line, parse_value::<f64>(e)?)),
                "net.blocks" => t.net.blocks = parse_value(e)?,
                "net.filters" => t.net.filters = parse_value(e)?,
                "net.embed_dim" => t.net.embed_dim = parse_value(e)?,
                "search.algorithm" => {
                    t.search.algorithm = parse_enum(e, &[("maple", Algorithm::Maple), ("pimc", Algorithm::Pimc)])?
                }
                "search.sampler" => {
                    t.search.sampler =
                        parse_enum(e, &[("random", SamplerKind::Random), ("siamese", SamplerKind::Siamese)])?
                }
                "search.simulations" => t.search.simulations = parse_value(e)?,
                "search.k" => t.search.k = parse_value(e)?,
                "search.m" => t.search.m = parse_value(e)?,
                "search.c_puct" => t.search.c_puct = parse_value(e)?,
                "search.noise_eps" => t.search.noise_eps = parse_value(e)?,
                "search.temperature_moves" => t.search.temperature_moves = Some(parse_value(e)?),
                "train.iterations" => t.iterations = parse_value(e)?,
                "train.games_per_iter" => t.games_per_iter = parse_value(e)?,
                "train.steps_per_iter" => t.steps_per_iter = parse_value(e)?,
                "train.batch" => t.batch = parse_value(e)?,
                "train.lr" => t.lr = parse_value(e)?,
                "train.momentum" => t.momentum = parse_value(e)?,
                "train.weight_decay" => t.weight_decay = parse_value(e)?,
                "train.buffer_games" => t.buffer_games = parse_value(e)?,
                "train.seed" => t.seed = parse_value(e)?,
                "train.workers" => t.workers = parse_value(e)?,
                "eval.games" => cfg.eval.games = parse_value(e)?,
                "eval.opponents" => {
                    cfg.eval.opponents =
                        e.value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                "eval.seed" => cfg.eval.seed = parse_value(e)?,
                "eval.simulations" => cfg.eval.simulations = parse_value(e)?,
                "serve.port" => cfg.serve.port = parse_value(e)?,
                "serve.max_games" => cfg.serve.max_games = parse_value(e)?,
                _ => return Err(ConfigError::UnknownKey { line: e.line, key: e.key.clone() }),
            }
        }
        let kind = cfg.train.game.kind;
        cfg.train.game = match kind {
            GameKind::DarkHex => {
                if let Some((line, _)) = komi {
                    return Err(ConfigError::Value {
                        line,
                        key: "game.komi".into(),
                        message: "komi applies to phantomgo only".into(),
                    });
                }
                GameSpec::dark_hex(default_size(profile, kind))
            }
            GameKind::PhantomGo => GameSpec::phantom_go(default_size(profile, kind)),
        };
        if let Some((_, s)) = size {
            cfg.train.game.size = s;
        }
        if let Some((_, k)) = komi {
            cfg.train.game.komi = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
