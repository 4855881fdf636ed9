//! Two-player hidden-placement games adjudicated by a referee.
//!
//! A [`WorldState`] is a fully determined position. Players never see it
//! directly: every attempted move goes through [`WorldState::apply_attempt`],
//! which returns the referee's [`MoveFeedback`] and one
//! [`ObservationEvent`] per player describing what that player learns.

mod cells;
pub mod darkhex;
mod history;
pub mod phantomgo;
mod record;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cells::{CellIter, CellSet, MAX_BOARD_SIZE};
pub use darkhex::HexWorld;
pub use history::{ObservationHistory, TurnSnapshot};
pub use phantomgo::GoWorld;
pub use record::{format_candidates, AttemptLine, GameRecord, GameSession, RecordError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerId {
    First,
    Second,
}

impl PlayerId {
    pub const BOTH: [PlayerId; 2] = [PlayerId::First, PlayerId::Second];

    pub fn opponent(self) -> PlayerId {
        match self {
            PlayerId::First => PlayerId::Second,
            PlayerId::Second => PlayerId::First,
        }
    }

    pub fn index(self) -> usize {
        match self {
            PlayerId::First => 0,
            PlayerId::Second => 1,
        }
    }

    pub fn from_index(index: usize) -> PlayerId {
        if index == 0 {
            PlayerId::First
        } else {
            PlayerId::Second
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Place(usize),
    Pass,
}

impl Action {
    /// Position of this action in a policy vector over `area` cells plus
    /// (for Phantom Go) a trailing pass entry.
    pub fn index(self, area: usize) -> usize {
        match self {
            Action::Place(cell) => cell,
            Action::Pass => area,
        }
    }

    pub fn from_index(index: usize, area: usize) -> Action {
        if index == area {
            Action::Pass
        } else {
            Action::Place(index)
        }
    }

    pub fn cell(self) -> Option<usize> {
        match self {
            Action::Place(cell) => Some(cell),
            Action::Pass => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Place(cell) => write!(f, "{cell}"),
            Action::Pass => f.write_str("pass"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "pass" {
            return Ok(Action::Pass);
        }
        s.parse::<usize>()
            .map(Action::Place)
            .map_err(|_| format!("invalid action `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveFeedback {
    Legal { captured: Vec<usize> },
    IllegalOccupied,
    IllegalSuicide,
    IllegalKo,
}

impl MoveFeedback {
    pub fn legal() -> Self {
        MoveFeedback::Legal { captured: Vec::new() }
    }

    pub fn is_legal(&self) -> bool {
        matches!(self, MoveFeedback::Legal { .. })
    }

    pub fn captured(&self) -> &[usize] {
        match self {
            MoveFeedback::Legal { captured } => captured,
            _ => &[],
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            MoveFeedback::Legal { .. } => "legal",
            MoveFeedback::IllegalOccupied => "occupied",
            MoveFeedback::IllegalSuicide => "suicide",
            MoveFeedback::IllegalKo => "ko",
        }
    }
}

/// What one player learns from one attempt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationEvent {
    /// Number of completed moves before the attempt.
    pub turn: u32,
    pub actor: PlayerId,
    pub visible_action: Option<Action>,
    pub feedback: Option<MoveFeedback>,
    pub revealed_cells: Vec<(usize, PlayerId)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameResult {
    Win(PlayerId),
    Draw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub result: GameResult,
    /// Phantom Go only: Black area minus White area minus komi.
    pub score_margin: Option<f64>,
}

impl GameOutcome {
    pub fn win(player: PlayerId) -> Self {
        GameOutcome { result: GameResult::Win(player), score_margin: None }
    }

    pub fn winner(&self) -> Option<PlayerId> {
        match self.result {
            GameResult::Win(p) => Some(p),
            GameResult::Draw => None,
        }
    }
}

/// +1 for a win, -1 for a loss and 0 for a draw, seen from `perspective`.
pub fn outcome_value(outcome: &GameOutcome, perspective: PlayerId) -> f64 {
    match outcome.result {
        GameResult::Win(p) if p == perspective => 1.0,
        GameResult::Win(_) => -1.0,
        GameResult::Draw => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameKind {
    DarkHex,
    PhantomGo,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::DarkHex => "darkhex",
            GameKind::PhantomGo => "phantomgo",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "darkhex" | "hex" => Ok(GameKind::DarkHex),
            "phantomgo" | "go" => Ok(GameKind::PhantomGo),
            _ => Err(format!("unknown game `{s}` (expected darkhex or phantomgo)")),
        }
    }
}

/// Game selection plus board parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub kind: GameKind,
    pub size: usize,
    /// Points credited to White (Phantom Go only).
    pub komi: f64,
}

impl GameSpec {
    pub fn dark_hex(size: usize) -> Self {
        GameSpec { kind: GameKind::DarkHex, size, komi: 0.0 }
    }

    pub fn phantom_go(size: usize) -> Self {
        GameSpec { kind: GameKind::PhantomGo, size, komi: 1.0 }
    }

    pub fn area(&self) -> usize {
        self.size * self.size
    }

    /// Policy vector length: one entry per cell, plus pass for Phantom Go.
    pub fn num_actions(&self) -> usize {
        match self.kind {
            GameKind::DarkHex => self.area(),
            GameKind::PhantomGo => self.area() + 1,
        }
    }

    /// Phantom Go games are scored once this many legal moves have been played.
    pub fn move_limit(&self) -> u32 {
        (4 * self.area()) as u32
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.size == 0 || self.size > MAX_BOARD_SIZE {
            return Err(GameError::BoardSize(self.size));
        }
        if !self.komi.is_finite() {
            return Err(GameError::Komi(self.komi));
        }
        Ok(())
    }

    pub fn initial_world(&self) -> Result<WorldState, GameError> {
        self.validate()?;
        Ok(match self.kind {
            GameKind::DarkHex => WorldState::Hex(HexWorld::new(self.size)),
            GameKind::PhantomGo => WorldState::Go(GoWorld::new(self.size, self.komi)),
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("board size {0} unsupported (1..={MAX_BOARD_SIZE})")]
    BoardSize(usize),
    #[error("komi {0} is not finite")]
    Komi(f64),
    #[error("cell {cell} is outside a board of {area} cells")]
    CellOutOfRange { cell: usize, area: usize },
    #[error("pass is not an action in this game")]
    PassNotAllowed,
    #[error("{0:?} attempted a move while it is not their turn")]
    NotToPlay(PlayerId),
    #[error("the game is already over")]
    GameOver,
}

/// Result of one referee adjudication.
#[derive(Clone, Debug)]
pub struct AttemptResult {
    pub feedback: MoveFeedback,
    pub next: WorldState,
    /// Indexed by [`PlayerId::index`]; `None` when that player learns nothing.
    pub events: [Option<ObservationEvent>; 2],
}

/// Stone placement only, used to compare determinizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoardKey(pub [CellSet; 2]);

#[derive(Clone, Debug, PartialEq)]
pub enum WorldState {
    Hex(HexWorld),
    Go(GoWorld),
}

impl WorldState {
    pub fn spec(&self) -> GameSpec {
        match self {
            WorldState::Hex(w) => GameSpec::dark_hex(w.size()),
            WorldState::Go(w) => GameSpec { kind: GameKind::PhantomGo, size: w.size(), komi: w.komi() },
        }
    }

    pub fn kind(&self) -> GameKind {
        match self {
            WorldState::Hex(_) => GameKind::DarkHex,
            WorldState::Go(_) => GameKind::PhantomGo,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            WorldState::Hex(w) => w.size(),
            WorldState::Go(w) => w.size(),
        }
    }

    pub fn area(&self) -> usize {
        self.size() * self.size()
    }

    pub fn num_actions(&self) -> usize {
        self.spec().num_actions()
    }

    pub fn to_play(&self) -> PlayerId {
        match self {
            WorldState::Hex(w) => w.to_play(),
            WorldState::Go(w) => w.to_play(),
        }
    }

    pub fn move_number(&self) -> u32 {
        match self {
            WorldState::Hex(w) => w.move_number(),
            WorldState::Go(w) => w.move_number(),
        }
    }

    pub fn stones(&self, player: PlayerId) -> CellSet {
        match self {
            WorldState::Hex(w) => w.stones(player),
            WorldState::Go(w) => w.stones(player),
        }
    }

    /// Stones of `player`'s opponent that `player` has discovered.
    pub fn known_by(&self, player: PlayerId) -> CellSet {
        match self {
            WorldState::Hex(w) => w.known_by(player),
            WorldState::Go(w) => w.known_by(player),
        }
    }

    pub fn owner(&self, cell: usize) -> Option<PlayerId> {
        PlayerId::BOTH.into_iter().find(|&p| self.stones(p).contains(cell))
    }

    pub fn board_key(&self) -> BoardKey {
        BoardKey([self.stones(PlayerId::First), self.stones(PlayerId::Second)])
    }

    pub fn terminal_outcome(&self) -> Option<GameOutcome> {
        match self {
            WorldState::Hex(w) => w.winner().map(GameOutcome::win),
            WorldState::Go(w) => w.terminal_outcome(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal_outcome().is_some()
    }

    /// Whether the referee would accept `action` from the player to move.
    pub fn is_legal(&self, action: Action) -> bool {
        if self.is_terminal() {
            return false;
        }
        match self {
            WorldState::Hex(w) => match action {
                Action::Place(cell) => cell < w.area() && w.owner(cell).is_none(),
                Action::Pass => false,
            },
            WorldState::Go(w) => match action {
                Action::Pass => true,
                Action::Place(cell) => cell < w.area() && w.placement(cell).is_legal(),
            },
        }
    }

    /// Legal actions of the player to move, in action-index order.
    pub fn legal_actions(&self) -> Vec<Action> {
        let n = self.num_actions();
        let area = self.area();
        (0..n)
            .map(|i| Action::from_index(i, area))
            .filter(|&a| self.is_legal(a))
            .collect()
    }

    /// Legal-action mask of length [`WorldState::num_actions`].
    pub fn legal_mask(&self) -> Vec<bool> {
        let area = self.area();
        (0..self.num_actions()).map(|i| self.is_legal(Action::from_index(i, area))).collect()
    }

    /// Legal actions for `actor`; empty unless `actor` is to play.
    pub fn legal_actions_for(&self, actor: PlayerId) -> Vec<Action> {
        if actor != self.to_play() {
            return Vec::new();
        }
        self.legal_actions()
    }

    /// Referee adjudication of `actor` attempting `action`.
    pub fn apply_attempt(&self, actor: PlayerId, action: Action) -> Result<AttemptResult, GameError> {
        if let Action::Place(cell) = action {
            if cell >= self.area() {
                return Err(GameError::CellOutOfRange { cell, area: self.area() });
            }
        }
        if self.is_terminal() {
            return Err(GameError::GameOver);
        }
        if actor != self.to_play() {
            return Err(GameError::NotToPlay(actor));
        }
        let turn = self.move_number();
        let (feedback, next) = match self {
            WorldState::Hex(w) => {
                let Action::Place(cell) = action else {
                    return Err(GameError::PassNotAllowed);
                };
                let (fb, next) = w.attempt(cell);
                (fb, next.map(WorldState::Hex))
            }
            WorldState::Go(w) => {
                let (fb, next) = w.attempt(action);
                (fb, next.map(WorldState::Go))
            }
        };
        let opponent = actor.opponent();
        let mut events: [Option<ObservationEvent>; 2] = [None, None];
        match &feedback {
            MoveFeedback::Legal { captured } => {
                events[actor.index()] = Some(ObservationEvent {
                    turn,
                    actor,
                    visible_action: Some(action),
                    feedback: Some(feedback.clone()),
                    revealed_cells: captured.iter().map(|&c| (c, opponent)).collect(),
                });
                // Placements stay hidden from the opponent; passes do not.
                events[opponent.index()] = Some(ObservationEvent {
                    turn,
                    actor,
                    visible_action: (action == Action::Pass).then_some(Action::Pass),
                    feedback: Some(feedback.clone()),
                    revealed_cells: captured.iter().map(|&c| (c, opponent)).collect(),
                });
            }
            illegal => {
                let revealed = match (illegal, action) {
                    (MoveFeedback::IllegalOccupied, Action::Place(cell)) => {
                        self.owner(cell).map(|owner| vec![(cell, owner)]).unwrap_or_default()
                    }
                    _ => Vec::new(),
                };
                events[actor.index()] = Some(ObservationEvent {
                    turn,
                    actor,
                    visible_action: Some(action),
                    feedback: Some(illegal.clone()),
                    revealed_cells: revealed,
                });
            }
        }
        let next = match (next, &feedback, action) {
            (Some(next), _, _) => next,
            (None, MoveFeedback::IllegalOccupied, Action::Place(cell)) => self.with_known(actor, cell),
            (None, _, _) => self.clone(),
        };
        Ok(AttemptResult { feedback, next, events })
    }

    /// Copy in which `player` has discovered the opponent stone at `cell`.
    pub fn with_known(&self, player: PlayerId, cell: usize) -> WorldState {
        match self {
            WorldState::Hex(w) => WorldState::Hex(w.with_known(player, cell)),
            WorldState::Go(w) => WorldState::Go(w.with_known(player, cell)),
        }
    }

    /// Advance by a move known to be legal, skipping event construction.
    /// Returns `None` when the referee would reject it.
    pub fn play(&self, action: Action) -> Option<WorldState> {
        if self.is_terminal() {
            return None;
        }
        match (self, action) {
            (WorldState::Hex(w), Action::Place(cell)) if cell < w.area() => {
                w.attempt(cell).1.map(WorldState::Hex)
            }
            (WorldState::Hex(_), _) => None,
            (WorldState::Go(w), Action::Place(cell)) if cell >= w.area() => None,
            (WorldState::Go(w), a) => w.attempt(a).1.map(WorldState::Go),
        }
    }

    /// Plain-text board: `.` empty, `X` first player, `O` second player.
    pub fn render(&self) -> String {
        match self {
            WorldState::Hex(w) => w.render(),
            WorldState::Go(w) => w.render(),
        }
    }
}
