use std::sync::Arc;

use rand::Rng;

use super::buffer::{StoredDecision, StoredGame};
use crate::agent::{play_game, Agent};
use crate::encode::{encode_board4, encode_history, encode_state};
use crate::game::{outcome_value, GameError, GameOutcome, GameRecord, GameSession, GameSpec, ObservationHistory, PlayerId, RecordError, WorldState};
use crate::nn::{Network, TrainingSample, Triplet};
use crate::sampler::{derive_constraints, sample_random};
use crate::search::SearchConfig;
use crate::seeds::rng_for;

/// One search decision with everything the loss needs.
#[derive(Clone, Debug)]
pub struct TrainingRecord {
    pub history: ObservationHistory,
    /// True world when the decision was made.
    pub world: WorldState,
    pub viewer: PlayerId,
    pub legal: Vec<bool>,
    /// Search policy restricted to the true world's legal actions.
    pub pi: Vec<f32>,
    pub z: f32,
}

#[derive(Clone, Debug)]
pub struct SelfPlayGame {
    pub stored: StoredGame,
    pub records: Vec<TrainingRecord>,
    pub outcome: GameOutcome,
    pub moves: u32,
    pub searches: u64,
    pub pv_evals: u64,
    pub forfeited: bool,
}

/// Plays one game with `net` in both seats.
pub fn selfplay_game(
    net: &Arc<Network>,
    spec: GameSpec,
    search: &SearchConfig,
    id: u64,
    seed: u64,
) -> Result<SelfPlayGame, GameError> {
    let agent = Agent::Search { net: Arc::clone(net), config: search.clone() };
    let mut rng = rng_for(seed, &[]);
    let mut session = GameSession::new(spec, seed)?;
    let mut decisions = Vec::new();
    let mut searches = 0;
    let mut pv_evals = 0;
    play_game(&mut session, [&agent, &agent], &mut rng, |s, d| {
        if let Some(r) = &d.search {
            searches += 1;
            pv_evals += r.budget.policy_value_evals;
            decisions.push(StoredDecision { attempt: s.attempts().len(), pi: r.pi.iter().map(|&p| p as f32).collect() });
        }
    })?;
    let stored = StoredGame { id, record: session.record().to_string(), decisions };
    let records = materialize(&stored).expect("freshly written record replays");
    Ok(SelfPlayGame {
        stored,
        records,
        outcome: session.outcome().expect("game finished"),
        moves: session.world().move_number(),
        searches,
        pv_evals,
        forfeited: session.forfeited(),
    })
}

/// Rebuilds the training records of a stored game by replaying it.
/// Decisions whose policy has no mass on a legal action are dropped.
pub fn materialize(stored: &StoredGame) -> Result<Vec<TrainingRecord>, RecordError> {
    let record: GameRecord = stored.record.parse()?;
    let outcome = record.outcome.ok_or(RecordError::MissingHeader("result"))?;
    let mut session = GameSession::new(record.spec, record.seed).map_err(RecordError::Game)?;
    let mut out = Vec::with_capacity(stored.decisions.len());
    let mut next = stored.decisions.iter().peekable();
    for (i, line) in record.attempts.iter().enumerate() {
        while let Some(d) = next.next_if(|d| d.attempt == i) {
            let viewer = session.to_play();
            let world = session.world().clone();
            let legal = world.legal_mask();
            let mut pi: Vec<f32> = d.pi.iter().zip(&legal).map(|(&p, &l)| if l { p } else { 0.0 }).collect();
            let sum: f32 = pi.iter().sum();
            if sum <= 0.0 {
                continue;
            }
            pi.iter_mut().for_each(|p| *p /= sum);
            out.push(TrainingRecord {
                history: session.history(viewer).clone(),
                world,
                viewer,
                legal,
                pi,
                z: outcome_value(&outcome, viewer) as f32,
            });
        }
        session.attempt(line.actor, line.action).map_err(RecordError::Game)?;
    }
    Ok(out)
}

/// Anchor, positive and a fresh negative for `record`; `None` when the
/// viewer's information set holds only the true world.
pub fn build_triplet<R: Rng + ?Sized>(record: &TrainingRecord, rng: &mut R) -> Option<Triplet> {
    let c = derive_constraints(&record.history);
    let truth = record.world.board_key();
    let negative = sample_random(&c, 2, rng).worlds.into_iter().find(|w| w.board_key() != truth)?;
    Some(Triplet {
        anchor: encode_history(&record.history),
        positive: encode_board4(&record.world, record.viewer),
        negative: encode_board4(&negative, record.viewer),
    })
}

impl TrainingRecord {
    /// Loss input for this record with a freshly drawn triplet negative.
    pub fn to_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrainingSample {
        TrainingSample {
            state: encode_state(&self.world, self.viewer),
            legal: self.legal.clone(),
            pi: self.pi.clone(),
            z: self.z,
            triplet: build_triplet(self, rng),
        }
    }
}
