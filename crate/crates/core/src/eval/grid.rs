use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use super::matches::{run_match, EvalError, MatchSpec};
use super::stats::win_rate_ci;
use crate::agent::Agent;
use crate::game::GameSpec;
use crate::nn::Network;
use crate::search::SearchConfig;
use crate::seeds::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    K,
    M,
}

impl Axis {
    pub fn default_values(self) -> Vec<usize> {
        match self {
            Axis::K => vec![1, 5, 10],
            Axis::M => vec![10, 30, 50, 100],
        }
    }

    /// `base` with this axis set to `value`, keeping k ≤ m.
    pub fn apply(self, base: &SearchConfig, value: usize) -> SearchConfig {
        let mut c = base.clone();
        match self {
            Axis::K => {
                c.k = value;
                c.m = c.m.max(value);
            }
            Axis::M => {
                c.m = value;
                c.k = c.k.min(value);
            }
        }
        c
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::K => "k",
            Axis::M => "m",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k" => Ok(Axis::K),
            "m" => Ok(Axis::M),
            other => Err(format!("unknown ablation axis `{other}` (expected k or m)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub train: usize,
    pub eval: usize,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    pub rate: f64,
    pub ci: f64,
}

impl GridCell {
    pub fn n(&self) -> u64 {
        self.wins + self.draws + self.losses
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub axis: Axis,
    pub train_values: Vec<usize>,
    pub eval_values: Vec<usize>,
    pub cells: Vec<GridCell>,
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Grid {
    pub fn cell(&self, train: usize, eval: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.train == train && c.eval == eval)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "axis={} train_values={} eval_values={}\n",
            self.axis,
            join(&self.train_values),
            join(&self.eval_values)
        );
        for c in &self.cells {
            let _ = writeln!(s, "cell {} {} rate={:.6} ci={:.6} n={}", c.train, c.eval, c.rate, c.ci, c.n());
        }
        s
    }
}

pub struct AblationSpec {
    pub game: GameSpec,
    pub axis: Axis,
    /// One trained network per train value.
    pub trained: Vec<(usize, Arc<Network>)>,
    pub eval_values: Vec<usize>,
    pub base: SearchConfig,
    pub opponents: Vec<Agent>,
    pub games_per_opponent: u32,
    pub seed: u64,
}

/// Score of each (train value, eval value) agent against the whole
/// opponent pool. Every cell meets each opponent with the same seeds.
pub fn ablation_grid(spec: &AblationSpec) -> Result<Grid, EvalError> {
    let mut cells = Vec::new();
    for (tv, net) in &spec.trained {
        for &ev in &spec.eval_values {
            let agent = Agent::Search { net: Arc::clone(net), config: spec.axis.apply(&spec.base, ev) };
            let (mut w, mut d, mut l) = (0, 0, 0);
            for (i, opp) in spec.opponents.iter().enumerate() {
                let r = run_match(&MatchSpec {
                    game: spec.game,
                    a: agent.clone(),
                    b: opp.clone(),
                    games_total: spec.games_per_opponent,
                    seed: derive_seed(spec.seed, &[i as u64]),
                })?;
                w += r.wins;
                d += r.draws;
                l += r.losses;
            }
            let (rate, ci) = win_rate_ci(w, d, l)?;
            cells.push(GridCell { train: *tv, eval: ev, wins: w, draws: d, losses: l, rate, ci });
        }
    }
    Ok(Grid {
        axis: spec.axis,
        train_values: spec.trained.iter().map(|t| t.0).collect(),
        eval_values: spec.eval_values.clone(),
        cells,
    })
}
