use rayon::prelude::*;
use thiserror::Error;

use super::stats::{win_rate_ci, PairResult, StatsError};
use crate::agent::{play_game, Agent};
use crate::game::{GameError, GameOutcome, GameRecord, GameSession, GameSpec, PlayerId};
use crate::seeds::{derive_seed, rng_for};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("games_total must be even, got {0}")]
    OddGames(u32),
    #[error("games_total must be positive")]
    NoGames,
    #[error("agent {agent}: {message}")]
    Mismatch { agent: String, message: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Clone, Debug)]
pub struct MatchSpec {
    pub game: GameSpec,
    pub a: Agent,
    pub b: Agent,
    pub games_total: u32,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct MatchGame {
    /// Seat of agent A.
    pub a_seat: PlayerId,
    pub outcome: GameOutcome,
    pub record: GameRecord,
}

#[derive(Clone, Debug)]
pub struct MatchResult {
    pub wins: u64,
    pub losses: u64,
    pub draws: u64,
    pub games: Vec<MatchGame>,
}

impl MatchResult {
    pub fn total(&self) -> u64 {
        self.wins + self.losses + self.draws
    }

    pub fn rate_ci(&self) -> Result<(f64, f64), StatsError> {
        win_rate_ci(self.wins, self.draws, self.losses)
    }

    pub fn as_pair(&self, a: usize, b: usize) -> PairResult {
        PairResult { a, b, wins_a: self.wins as f64, wins_b: self.losses as f64, draws: self.draws as f64 }
    }
}

pub fn check_agent(agent: &Agent, game: &GameSpec) -> Result<(), EvalError> {
    if let Agent::Search { net, config } = agent {
        net.check_game(game).map_err(|message| EvalError::Mismatch { agent: agent.label(), message })?;
        config.validate().map_err(|message| EvalError::Mismatch { agent: agent.label(), message })?;
    }
    Ok(())
}

/// Plays `games_total` games in colour-swapped pairs: game `2p` has A
/// first, game `2p + 1` has B first, both with the seed of pair `p`.
pub fn run_match(spec: &MatchSpec) -> Result<MatchResult, EvalError> {
    if spec.games_total == 0 {
        return Err(EvalError::NoGames);
    }
    if spec.games_total % 2 == 1 {
        return Err(EvalError::OddGames(spec.games_total));
    }
    check_agent(&spec.a, &spec.game)?;
    check_agent(&spec.b, &spec.game)?;
    let games: Vec<MatchGame> = (0..spec.games_total)
        .into_par_iter()
        .map(|i| {
            let pair_seed = derive_seed(spec.seed, &[(i / 2) as u64]);
            let a_seat = if i % 2 == 0 { PlayerId::First } else { PlayerId::Second };
            let seats = if a_seat == PlayerId::First { [&spec.a, &spec.b] } else { [&spec.b, &spec.a] };
            let mut session = GameSession::new(spec.game, pair_seed)?;
            let mut rng = rng_for(pair_seed, &[]);
            play_game(&mut session, seats, &mut rng, |_, _| {})?;
            Ok(MatchGame { a_seat, outcome: session.outcome().expect("finished"), record: session.record() })
        })
        .collect::<Result<_, EvalError>>()?;
    let (mut wins, mut losses, mut draws) = (0, 0, 0);
    for g in &games {
        match g.outcome.winner() {
            Some(w) if w == g.a_seat => wins += 1,
            Some(_) => losses += 1,
            None => draws += 1,
        }
    }
    Ok(MatchResult { wins, losses, draws, games })
}
