//! Determinizations of the hidden board consistent with one player's view.
//!
//! A world is consistent when it contains exactly the viewer's stones, the
//! opponent stones the viewer has discovered, `hidden_opponent_count` more
//! opponent stones on cells not known to be empty, and is itself a
//! reachable non-terminal position (no Hex winner, no Go group without
//! liberties).

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::encode::{encode_board4, encode_history, PlaneTensor};
use crate::game::{CellSet, GameKind, GameSpec, GoWorld, HexWorld, ObservationHistory, PlayerId, WorldState};

/// Attempts allowed per candidate slot before giving up on rejection sampling.
pub const ATTEMPTS_PER_SLOT: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct InformationConstraints {
    pub spec: GameSpec,
    pub viewer: PlayerId,
    pub to_play: PlayerId,
    pub own_stones: CellSet,
    pub known_opponent_stones: CellSet,
    pub known_empty: CellSet,
    pub hidden_opponent_count: usize,
    pub move_number: u32,
    pub consecutive_passes: u8,
    /// Stones captured, indexed by the capturing player.
    pub prisoners: [u32; 2],
}

pub fn derive_constraints(history: &ObservationHistory) -> InformationConstraints {
    let viewer = history.viewer();
    InformationConstraints {
        spec: history.spec(),
        viewer,
        to_play: history.to_play(),
        own_stones: history.own_stones(),
        known_opponent_stones: history.known_opponent_stones(),
        known_empty: history.known_empty(),
        hidden_opponent_count: history.hidden_opponent_count(),
        move_number: history.move_number(),
        consecutive_passes: history.consecutive_passes(),
        prisoners: [history.prisoners(PlayerId::First), history.prisoners(PlayerId::Second)],
    }
}

impl InformationConstraints {
    /// Cells that may hold a hidden opponent stone, ascending.
    pub fn free_cells(&self) -> Vec<usize> {
        CellSet::full(self.spec.area())
            .difference(self.own_stones)
            .difference(self.known_opponent_stones)
            .difference(self.known_empty)
            .to_vec()
    }

    /// Number of hidden-stone placements before the validity filter.
    pub fn placement_count(&self) -> u128 {
        binomial(self.free_cells().len(), self.hidden_opponent_count)
    }

    /// The world with the given hidden opponent stones.
    pub fn world_with(&self, hidden: CellSet) -> WorldState {
        let opp_stones = self.known_opponent_stones.union(hidden);
        let mut stones = [CellSet::EMPTY; 2];
        stones[self.viewer.index()] = self.own_stones;
        stones[self.viewer.opponent().index()] = opp_stones;
        let mut known = [CellSet::EMPTY; 2];
        known[self.viewer.index()] = self.known_opponent_stones;
        let size = self.spec.size;
        match self.spec.kind {
            GameKind::DarkHex => WorldState::Hex(HexWorld::from_stones(
                size,
                stones[0],
                stones[1],
                self.to_play,
                self.move_number,
                known,
            )),
            GameKind::PhantomGo => WorldState::Go(GoWorld::from_stones(
                size,
                self.spec.komi,
                stones[0],
                stones[1],
                self.to_play,
                self.move_number,
                self.consecutive_passes,
                self.prisoners,
                known,
            )),
        }
    }

    /// Reachability filter applied to every candidate.
    pub fn is_valid(&self, world: &WorldState) -> bool {
        match world {
            WorldState::Hex(w) => w.winner().is_none(),
            WorldState::Go(w) => w.all_groups_alive(),
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Exhaustive,
    Random,
    SiameseFiltered,
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub worlds: Vec<WorldState>,
    pub provenance: Provenance,
    /// Anchor distances, ascending, for Siamese-filtered sets.
    pub distances: Option<Vec<f64>>,
    /// Embedding-tower forward passes spent building the set.
    pub embed_evals: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("{count} placements exceed the enumeration limit {limit}")]
    TooMany { count: u128, limit: u128 },
}

/// Every consistent world, in lexicographic order of hidden cells.
pub fn enumerate_consistent(c: &InformationConstraints, limit: u128) -> Result<CandidateSet, SamplerError> {
    let count = c.placement_count();
    if count > limit {
        return Err(SamplerError::TooMany { count, limit });
    }
    let worlds = c
        .free_cells()
        .into_iter()
        .combinations(c.hidden_opponent_count)
        .map(|cells| c.world_with(cells.into_iter().collect()))
        .filter(|w| c.is_valid(w))
        .collect();
    Ok(CandidateSet { worlds, provenance: Provenance::Exhaustive, distances: None, embed_evals: 0 })
}

/// Up to `k` distinct consistent worlds, uniformly without replacement.
pub fn sample_random<R: Rng + ?Sized>(c: &InformationConstraints, k: usize, rng: &mut R) -> CandidateSet {
    let small = (4 * k as u128).max(64);
    if c.placement_count() <= small {
        let all = enumerate_consistent(c, small).expect("within limit").worlds;
        let worlds = if all.len() <= k {
            all
        } else {
            let mut picks = index::sample(rng, all.len(), k).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| all[i].clone()).collect()
        };
        return CandidateSet { worlds, provenance: Provenance::Random, distances: None, embed_evals: 0 };
    }
    let free = c.free_cells();
    let mut seen = HashSet::new();
    let mut worlds = Vec::with_capacity(k);
    'slots: for _ in 0..k {
        for _ in 0..ATTEMPTS_PER_SLOT {
            let hidden: CellSet =
                index::sample(rng, free.len(), c.hidden_opponent_count).into_iter().map(|i| free[i]).collect();
            if seen.contains(&hidden) {
                continue;
            }
            let w = c.world_with(hidden);
            if c.is_valid(&w) {
                seen.insert(hidden);
                worlds.push(w);
                continue 'slots;
            }
        }
        break;
    }
    CandidateSet { worlds, provenance: Provenance::Random, distances: None, embed_evals: 0 }
}

/// Maps observation histories and candidate boards into a shared space.
pub trait Embedder {
    fn embed_anchor(&self, history: &PlaneTensor) -> Vec<f32>;
    fn embed_state(&self, board: &PlaneTensor) -> Vec<f32>;
}

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

/// Draws `m` random candidates and keeps the `k` nearest to the anchor.
/// Ties keep generation order.
pub fn sample_siamese<R: Rng + ?Sized, E: Embedder + ?Sized>(
    c: &InformationConstraints,
    m: usize,
    k: usize,
    embedder: &E,
    anchor: &ObservationHistory,
    rng: &mut R,
) -> CandidateSet {
    let pool = sample_random(c, m.max(k), rng).worlds;
    let embed_evals = 1 + pool.len();
    let anchor_emb = embedder.embed_anchor(&encode_history(anchor));
    let mut scored: Vec<(f64, WorldState)> = pool
        .into_iter()
        .map(|w| (euclidean(&anchor_emb, &embedder.embed_state(&encode_board4(&w, c.viewer))), w))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(k);
    let (distances, worlds) = scored.into_iter().unzip();
    CandidateSet { worlds, provenance: Provenance::SiameseFiltered, distances: Some(distances), embed_evals }
}
