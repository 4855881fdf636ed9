//! Move choosers and the per-turn attempt loop.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::game::{Action, CellSet, GameError, GameKind, GameSession, MoveFeedback, ObservationHistory};
use crate::nn::Network;
use crate::search::{rollout_search, search, SearchConfig, SearchResult};

#[derive(Clone, Debug)]
pub enum Agent {
    /// Uniform over cells not known to be unavailable (plus pass in Go).
    Random,
    Rollout { simulations: u32 },
    Search { net: Arc<Network>, config: SearchConfig },
}

/// One chosen attempt, with the search that produced it if any.
#[derive(Clone, Debug)]
pub struct Decision {
    pub action: Action,
    pub search: Option<SearchResult>,
}

pub fn random_action<R: Rng + ?Sized>(history: &ObservationHistory, rng: &mut R) -> Action {
    let spec = history.spec();
    let blocked: CellSet =
        history.own_stones().union(history.known_opponent_stones()).union(history.tried_this_turn());
    let mut options: Vec<Action> = CellSet::full(spec.area()).difference(blocked).iter().map(Action::Place).collect();
    if spec.kind == GameKind::PhantomGo {
        options.push(Action::Pass);
    }
    *options.choose(rng).unwrap_or(&Action::Pass)
}

impl Agent {
    pub fn label(&self) -> String {
        match self {
            Agent::Random => "random".into(),
            Agent::Rollout { simulations } => format!("rollout:{simulations}"),
            Agent::Search { config, .. } => {
                format!("{:?}/{:?} N={} k={} m={}", config.algorithm, config.sampler, config.simulations, config.k, config.m)
            }
        }
    }

    /// Chooses the next attempt for the viewer of `history`. Falls back to
    /// a random attempt when the search cannot run.
    pub fn decide<R: Rng + ?Sized>(&self, history: &ObservationHistory, rng: &mut R) -> Decision {
        match self {
            Agent::Random => Decision { action: random_action(history, rng), search: None },
            Agent::Rollout { simulations } => Decision {
                action: rollout_search(history, *simulations, rng).unwrap_or_else(|_| random_action(history, rng)),
                search: None,
            },
            Agent::Search { net, config } => match search(history, net.as_ref(), config, rng) {
                Ok(result) => Decision { action: result.action, search: Some(result) },
                Err(_) => Decision { action: random_action(history, rng), search: None },
            },
        }
    }
}

/// Plays the current player's turn until a legal move, the end of the
/// game, or a forfeit. `observe` sees the session before every attempt.
pub fn play_turn<R, F>(
    session: &mut GameSession,
    agent: &Agent,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<(Action, MoveFeedback)>, GameError>
where
    R: Rng + ?Sized,
    F: FnMut(&GameSession, &Decision),
{
    let actor = session.to_play();
    let mut attempts = Vec::new();
    while !session.is_over() && session.to_play() == actor {
        let decision = agent.decide(session.history(actor), rng);
        observe(session, &decision);
        let feedback = session.attempt(actor, decision.action)?;
        let legal = feedback.is_legal();
        attempts.push((decision.action, feedback));
        if legal {
            break;
        }
    }
    Ok(attempts)
}

/// Plays a full game; `agents[i]` moves for the player with index `i`.
pub fn play_game<R, F>(session: &mut GameSession, agents: [&Agent; 2], rng: &mut R, mut observe: F) -> Result<(), GameError>
where
    R: Rng + ?Sized,
    F: FnMut(&GameSession, &Decision),
{
    while !session.is_over() {
        let agent = agents[session.to_play().index()];
        play_turn(session, agent, rng, &mut observe)?;
    }
    Ok(())
}
