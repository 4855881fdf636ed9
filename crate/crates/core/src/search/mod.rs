//! Tree search over sampled determinizations.
//!
//! * [`maple_search`]: k sampled worlds share one tree. Each selection step
//!   plays the chosen action in every surviving world and drops the worlds
//!   where it is illegal; leaves are evaluated in every surviving world and
//!   the results averaged ([`aggregate_policy`], [`aggregate_value`]).
//! * [`pimc_search`]: one independent search per sampled world, root visit
//!   distributions averaged.
//! * [`alphazero_search`]: plain single-world search.
//! * [`rollout_search`]: network-free UCT with random playouts.

mod alphazero;
mod maple;
mod pimc;
mod rollout;

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::encode_state;
use crate::game::{Action, ObservationHistory, WorldState};
use crate::nn::Network;
use crate::sampler::{derive_constraints, sample_random, sample_siamese, CandidateSet, Embedder};

pub use alphazero::{alphazero_search, alphazero_tree};
pub use maple::{maple_search, maple_search_worlds, MapleTree};
pub use pimc::{pimc_search, pimc_search_worlds};
pub use rollout::{random_rollout_value, rollout_search};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Maple,
    Pimc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    Random,
    Siamese,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub sampler: SamplerKind,
    pub simulations: u32,
    pub k: usize,
    pub m: usize,
    pub c_puct: f64,
    /// Dirichlet mixing fraction at the root; 0 disables noise.
    pub noise_eps: f64,
    /// Dirichlet concentration; `None` means 10 / board area.
    pub noise_alpha: Option<f64>,
    /// Moves (game move number) played proportionally to visits; `None`
    /// means ⌈10% of the board's cells⌉.
    pub temperature_moves: Option<u32>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: Algorithm::Maple,
            sampler: SamplerKind::Siamese,
            simulations: 16,
            k: 5,
            m: 50,
            c_puct: 1.25,
            noise_eps: 0.25,
            noise_alpha: None,
            temperature_moves: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.simulations == 0 {
            return Err("search.simulations must be at least 1".into());
        }
        if self.k == 0 {
            return Err("search.k must be at least 1".into());
        }
        if self.m < self.k {
            return Err(format!("search.m ({}) must be at least search.k ({})", self.m, self.k));
        }
        if !(self.c_puct.is_finite() && self.c_puct >= 0.0) {
            return Err("search.c_puct must be a non-negative number".into());
        }
        if !(0.0..=1.0).contains(&self.noise_eps) {
            return Err("search.noise_eps must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn temperature_moves_for(&self, area: usize) -> u32 {
        self.temperature_moves.unwrap_or_else(|| (area as f64 * 0.1).ceil() as u32)
    }

    pub fn alpha_for(&self, area: usize) -> f64 {
        self.noise_alpha.unwrap_or(10.0 / area as f64)
    }
}

/// Policy/value oracle for a single determinized world.
pub trait Evaluator: Sync {
    /// Policy over the game's action vector (zero where `legal` is false)
    /// and a value in [−1, 1] for the player to move.
    fn evaluate(&self, world: &WorldState, legal: &[bool]) -> (Vec<f32>, f32);

    fn evaluate_batch(&self, items: &[(&WorldState, &[bool])]) -> Vec<(Vec<f32>, f32)> {
        items.iter().map(|(w, l)| self.evaluate(w, l)).collect()
    }

    fn embedder(&self) -> Option<&dyn Embedder> {
        None
    }
}

impl Evaluator for Network {
    fn evaluate(&self, world: &WorldState, legal: &[bool]) -> (Vec<f32>, f32) {
        self.policy_value(&encode_state(world, world.to_play()), legal)
    }

    fn embedder(&self) -> Option<&dyn Embedder> {
        Some(self)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no world is consistent with the observation history")]
    EmptyInformationSet,
    #[error("no action is available at the root")]
    NoActions,
    #[error("the Siamese sampler needs a network with embedding towers")]
    NoEmbedder,
    #[error("the game is already over")]
    GameOver,
}

/// Evaluation-count instrumentation for one search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetCounter {
    pub simulations: u32,
    pub policy_value_evals: u64,
    pub siamese_evals: u64,
    /// Surviving worlds at the leaf of each simulation.
    pub valid_at_leaf: Vec<usize>,
    /// Worlds dropped during selection because a path action was illegal.
    pub discards: u64,
    /// Worlds that were terminal at a leaf.
    pub terminal_hits: u64,
    /// Simulations whose world set emptied before reaching a leaf.
    pub empty_worldsets: u64,
    pub expansions: u64,
}

impl BudgetCounter {
    pub fn merge(&mut self, other: &BudgetCounter) {
        self.simulations += other.simulations;
        self.policy_value_evals += other.policy_value_evals;
        self.siamese_evals += other.siamese_evals;
        self.valid_at_leaf.extend_from_slice(&other.valid_at_leaf);
        self.discards += other.discards;
        self.terminal_hits += other.terminal_hits;
        self.empty_worldsets += other.empty_worldsets;
        self.expansions += other.expansions;
    }

    /// `sims= k_valid_at_leaf=[...] pv_evals= siamese_evals= pi=[...]`
    pub fn log_line(&self, pi: &[f64]) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let mut s = String::new();
        let _ = write!(
            s,
            "sims={} k_valid_at_leaf=[{}] pv_evals={} siamese_evals={} pi=[{}]",
            self.simulations,
            join(self.valid_at_leaf.iter().map(|v| v.to_string()).collect()),
            self.policy_value_evals,
            self.siamese_evals,
            join(pi.iter().map(|p| format!("{p:.4}")).collect()),
        );
        s
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Normalized root visit counts over the action vector.
    pub pi: Vec<f64>,
    pub action: Action,
    pub budget: BudgetCounter,
    /// Root policy before renormalization and noise (MAPLE only).
    pub root_raw_prior: Vec<Option<f64>>,
    pub worlds_sampled: usize,
}

/// Leaf evaluation in one world.
#[derive(Clone, Debug, PartialEq)]
pub enum LeafEval {
    Evaluated { policy: Vec<f64>, legal: Vec<bool>, value: f64 },
    Terminal { value: f64 },
}

/// Mean policy per action over the evaluated worlds where that action is
/// legal; `None` for actions legal in none of them.
pub fn aggregate_policy(evals: &[LeafEval]) -> Vec<Option<f64>> {
    let width = evals
        .iter()
        .find_map(|e| match e {
            LeafEval::Evaluated { policy, .. } => Some(policy.len()),
            LeafEval::Terminal { .. } => None,
        })
        .unwrap_or(0);
    let mut sums = vec![0.0; width];
    let mut counts = vec![0usize; width];
    for e in evals {
        if let LeafEval::Evaluated { policy, legal, .. } = e {
            for j in 0..width {
                if legal[j] {
                    sums[j] += policy[j];
                    counts[j] += 1;
                }
            }
        }
    }
    sums.iter().zip(&counts).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect()
}

/// Mean value over all valid worlds, terminal ones included.
pub fn aggregate_value(evals: &[LeafEval]) -> f64 {
    let sum: f64 = evals
        .iter()
        .map(|e| match e {
            LeafEval::Evaluated { value, .. } | LeafEval::Terminal { value } => *value,
        })
        .sum();
    sum / evals.len() as f64
}

/// Renormalizes the defined entries; uniform if they sum to zero.
pub fn renormalize(raw: &[Option<f64>]) -> Vec<(usize, f64)> {
    let defined: Vec<(usize, f64)> = raw.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
    let total: f64 = defined.iter().map(|(_, p)| p).sum();
    let n = defined.len() as f64;
    defined
        .into_iter()
        .map(|(i, p)| (i, if total > 0.0 { p / total } else { 1.0 / n }))
        .collect()
}

/// Q + c·P·√(ΣN)/(1 + N) per child.
pub fn puct_scores(q: &[f64], p: &[f64], n: &[u32], c: f64) -> Vec<f64> {
    let total: u32 = n.iter().sum();
    let sqrt_total = (total as f64).sqrt();
    q.iter()
        .zip(p)
        .zip(n)
        .map(|((&q, &p), &n)| q + c * p * sqrt_total / (1.0 + n as f64))
        .collect()
}

/// Index of the best child; argmax of P when no child has been visited.
/// Ties go to the lowest index.
pub fn puct_select(q: &[f64], p: &[f64], n: &[u32], c: f64) -> usize {
    let total: u32 = n.iter().sum();
    let scores = if total == 0 { p.to_vec() } else { puct_scores(q, p, n, c) };
    argmax(&scores)
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Mixes Dirichlet(α) noise into `priors` in place.
pub fn add_dirichlet_noise<R: Rng + ?Sized>(priors: &mut [f64], eps: f64, alpha: f64, rng: &mut R) {
    if eps <= 0.0 || priors.is_empty() {
        return;
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let mut noise: Vec<f64> = priors.iter().map(|_| gamma.sample(rng)).collect();
    let sum: f64 = noise.iter().sum();
    if sum <= 0.0 {
        return;
    }
    noise.iter_mut().for_each(|x| *x /= sum);
    for (p, n) in priors.iter_mut().zip(noise) {
        *p = (1.0 - eps) * *p + eps * n;
    }
}

/// Proportional sampling before the temperature cutoff, argmax after.
pub fn choose_action<R: Rng + ?Sized>(pi: &[f64], area: usize, move_number: u32, cutoff: u32, rng: &mut R) -> Action {
    let index = if move_number < cutoff {
        let total: f64 = pi.iter().sum();
        let mut x = rng.random::<f64>() * total;
        let mut chosen = argmax(pi);
        for (i, &p) in pi.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            if x < p {
                chosen = i;
                break;
            }
            x -= p;
        }
        chosen
    } else {
        argmax(pi)
    };
    Action::from_index(index, area)
}

/// Samples the root worlds for a search from `history`.
pub fn sample_root_worlds<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    history: &ObservationHistory,
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
    budget: &mut BudgetCounter,
) -> Result<CandidateSet, SearchError> {
    let constraints = derive_constraints(history);
    let set = match config.sampler {
        SamplerKind::Random => sample_random(&constraints, config.k, rng),
        SamplerKind::Siamese => {
            let embedder = net.embedder().ok_or(SearchError::NoEmbedder)?;
            sample_siamese(&constraints, config.m, config.k, embedder, history, rng)
        }
    };
    budget.siamese_evals += set.embed_evals as u64;
    if set.is_empty() {
        return Err(SearchError::EmptyInformationSet);
    }
    Ok(set)
}

/// Action indices already refused this turn; never expanded at the root.
pub fn root_exclusions(history: &ObservationHistory) -> Vec<usize> {
    history.tried_this_turn().iter().collect()
}

/// Normalized visit counts, falling back to the priors when no child has
/// been visited.
pub fn visit_distribution(width: usize, children: &[(usize, f64, u32)]) -> Vec<f64> {
    let mut pi = vec![0.0; width];
    let total: u32 = children.iter().map(|c| c.2).sum();
    if total > 0 {
        for &(a, _, n) in children {
            pi[a] = n as f64 / total as f64;
        }
    } else {
        let prior_total: f64 = children.iter().map(|c| c.1).sum();
        for &(a, p, _) in children {
            pi[a] = if prior_total > 0.0 { p / prior_total } else { 1.0 / children.len() as f64 };
        }
    }
    pi
}

/// Dispatches on [`SearchConfig::algorithm`].
pub fn search<E: Evaluator + ?Sized, R: Rng + ?Sized>(
    history: &ObservationHistory,
    net: &E,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    match config.algorithm {
        Algorithm::Maple => maple_search(history, net, config, rng),
        Algorithm::Pimc => pimc_search(history, net, config, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn puct_hand_example() {
        let s = puct_scores(&[0.5, 0.2], &[0.3, 0.7], &[3, 1], 1.25);
        assert!((s[0] - 0.6875).abs() < 1e-12);
        assert!((s[1] - 1.075).abs() < 1e-12);
        assert_eq!(puct_select(&[0.5, 0.2], &[0.3, 0.7], &[3, 1], 1.25), 1);
    }

    #[test]
    fn first_visit_picks_highest_prior() {
        assert_eq!(puct_select(&[0.0; 3], &[0.2, 0.5, 0.3], &[0; 3], 1.25), 1);
        assert_eq!(puct_select(&[0.0; 3], &[0.5, 0.5, 0.0], &[0; 3], 1.25), 0);
    }

    #[test]
    fn aggregation_examples() {
        let evals = vec![
            LeafEval::Evaluated { policy: vec![0.2, 0.0, 0.8], legal: vec![true, false, true], value: 0.5 },
            LeafEval::Evaluated { policy: vec![0.4, 0.6, 0.0], legal: vec![true, true, false], value: -0.5 },
        ];
        let p = aggregate_policy(&evals);
        assert!((p[0].unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(p[1], Some(0.6));
        assert_eq!(p[2], Some(0.8));
        assert_eq!(aggregate_value(&evals), 0.0);
        let mixed = vec![
            LeafEval::Evaluated { policy: vec![1.0], legal: vec![true], value: 0.2 },
            LeafEval::Terminal { value: -1.0 },
        ];
        assert!((aggregate_value(&mixed) + 0.4).abs() < 1e-15);
        assert_eq!(aggregate_policy(&mixed), vec![Some(1.0)]);
        assert_eq!(aggregate_value(&[LeafEval::Terminal { value: 1.0 }]), 1.0);
    }

    #[test]
    fn noise_keeps_a_distribution() {
        use rand::SeedableRng;
        let mut p = vec![0.5, 0.25, 0.25];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        add_dirichlet_noise(&mut p, 0.25, 0.3, &mut rng);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_line_format() {
        let b = BudgetCounter { simulations: 2, policy_value_evals: 3, valid_at_leaf: vec![2, 1], ..Default::default() };
        assert_eq!(b.log_line(&[0.5, 0.5]), "sims=2 k_valid_at_leaf=[2,1] pv_evals=3 siamese_evals=0 pi=[0.5000,0.5000]");
    }
}
