use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::selfplay::{materialize, SelfPlayGame, TrainingRecord};
use crate::game::RecordError;

/// A self-play game in its persistent form: the record text plus the
/// search policy of every decision, keyed by attempt index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredGame {
    pub id: u64,
    pub record: String,
    pub decisions: Vec<StoredDecision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredDecision {
    /// Number of attempts made before this decision.
    pub attempt: usize,
    pub pi: Vec<f32>,
}

struct Entry {
    stored: StoredGame,
    records: Vec<TrainingRecord>,
}

/// FIFO buffer of whole games; positions are sampled uniformly across all
/// stored decisions.
pub struct ReplayBuffer {
    capacity: usize,
    games: VecDeque<Entry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer { capacity, games: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn positions(&self) -> usize {
        self.games.iter().map(|e| e.records.len()).sum()
    }

    pub fn game_ids(&self) -> Vec<u64> {
        self.games.iter().map(|e| e.stored.id).collect()
    }

    pub fn push(&mut self, game: SelfPlayGame) {
        self.push_entry(Entry { stored: game.stored, records: game.records });
    }

    pub fn push_stored(&mut self, stored: StoredGame) -> Result<(), RecordError> {
        let records = materialize(&stored)?;
        self.push_entry(Entry { stored, records });
        Ok(())
    }

    fn push_entry(&mut self, entry: Entry) {
        self.games.push_back(entry);
        while self.games.len() > self.capacity {
            self.games.pop_front();
        }
    }

    /// `n` positions drawn uniformly with replacement, with the id of the
    /// game each came from.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(u64, &TrainingRecord)> {
        let mut ends = Vec::with_capacity(self.games.len());
        let mut total = 0;
        for e in &self.games {
            total += e.records.len();
            ends.push(total);
        }
        if total == 0 {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let i = rng.random_range(0..total);
                let g = ends.partition_point(|&end| end <= i);
                let start = if g == 0 { 0 } else { ends[g - 1] };
                let e = &self.games[g];
                (e.stored.id, &e.records[i - start])
            })
            .collect()
    }

    pub fn stored(&self) -> Vec<&StoredGame> {
        self.games.iter().map(|e| &e.stored).collect()
    }
}
