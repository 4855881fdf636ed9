use serde::{Deserialize, Serialize};

use super::{Action, CellSet, GameOutcome, GameSpec, MoveFeedback, ObservationEvent, PlayerId};

/// What the viewer knew at the end of one of their turns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnSnapshot {
    pub own: CellSet,
    pub known_opponent: CellSet,
    /// Cells the viewer attempted during the turn without success.
    pub tried: CellSet,
    /// Cells emptied by captures during the turn (either colour).
    pub captured: CellSet,
}

/// One player's view of a game: the referee events they received, plus
/// caches derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationHistory {
    spec: GameSpec,
    viewer: PlayerId,
    events: Vec<ObservationEvent>,
    outcome: Option<GameOutcome>,
    cache: Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Derived {
    own: CellSet,
    known_opponent: CellSet,
    known_empty: CellSet,
    tried: CellSet,
    tried_this_turn: CellSet,
    revealed_captures: CellSet,
    opponent_placements: u32,
    /// Stones captured, indexed by the capturing player.
    prisoners: [u32; 2],
    consecutive_passes: u8,
    to_play: PlayerId,
    move_number: u32,
    attempts_this_turn: u32,
    last_feedback: Option<MoveFeedback>,
    turns: Vec<TurnSnapshot>,
    segment_tried: CellSet,
    segment_captured: CellSet,
    segment_events: u32,
}

impl Derived {
    fn new() -> Self {
        Derived {
            own: CellSet::EMPTY,
            known_opponent: CellSet::EMPTY,
            known_empty: CellSet::EMPTY,
            tried: CellSet::EMPTY,
            tried_this_turn: CellSet::EMPTY,
            revealed_captures: CellSet::EMPTY,
            opponent_placements: 0,
            prisoners: [0; 2],
            consecutive_passes: 0,
            to_play: PlayerId::First,
            move_number: 0,
            attempts_this_turn: 0,
            last_feedback: None,
            turns: Vec::new(),
            segment_tried: CellSet::EMPTY,
            segment_captured: CellSet::EMPTY,
            segment_events: 0,
        }
    }
}

impl ObservationHistory {
    pub fn new(spec: GameSpec, viewer: PlayerId) -> Self {
        ObservationHistory { spec, viewer, events: Vec::new(), outcome: None, cache: Derived::new() }
    }

    /// Rebuilds a history, and all its caches, from an event list.
    pub fn replay(spec: GameSpec, viewer: PlayerId, events: &[ObservationEvent], outcome: Option<GameOutcome>) -> Self {
        let mut h = ObservationHistory::new(spec, viewer);
        for e in events {
            h.push(e.clone());
        }
        h.outcome = outcome;
        h
    }

    pub fn push(&mut self, event: ObservationEvent) {
        let me = self.viewer;
        let c = &mut self.cache;
        c.segment_events += 1;
        let mine = event.actor == me;
        match &event.feedback {
            Some(MoveFeedback::Legal { captured }) => {
                let victim = event.actor.opponent();
                match event.visible_action {
                    Some(Action::Place(cell)) if mine => {
                        c.own.insert(cell);
                        c.known_empty.remove(cell);
                        c.consecutive_passes = 0;
                    }
                    Some(Action::Pass) => {
                        c.consecutive_passes = c.consecutive_passes.saturating_add(1).min(2);
                    }
                    _ => {
                        // Hidden opponent placement: it may sit on any cell we
                        // believed empty.
                        c.opponent_placements += 1;
                        c.known_empty = CellSet::EMPTY;
                        c.consecutive_passes = 0;
                    }
                }
                for &cell in captured {
                    if victim == me {
                        c.own.remove(cell);
                    } else {
                        c.known_opponent.remove(cell);
                    }
                    c.known_empty.insert(cell);
                    c.revealed_captures.insert(cell);
                    c.segment_captured.insert(cell);
                }
                c.prisoners[event.actor.index()] += captured.len() as u32;
                c.to_play = event.actor.opponent();
                c.move_number = event.turn + 1;
                c.tried_this_turn = CellSet::EMPTY;
                c.attempts_this_turn = 0;
                if mine {
                    c.last_feedback = event.feedback.clone();
                    c.turns.push(TurnSnapshot {
                        own: c.own,
                        known_opponent: c.known_opponent,
                        tried: c.segment_tried,
                        captured: c.segment_captured,
                    });
                    c.segment_tried = CellSet::EMPTY;
                    c.segment_captured = CellSet::EMPTY;
                    c.segment_events = 0;
                }
            }
            Some(illegal) if mine => {
                if let Some(Action::Place(cell)) = event.visible_action {
                    c.tried.insert(cell);
                    c.tried_this_turn.insert(cell);
                    c.segment_tried.insert(cell);
                    if matches!(illegal, MoveFeedback::IllegalSuicide | MoveFeedback::IllegalKo) {
                        c.known_empty.insert(cell);
                    }
                }
                for &(cell, owner) in &event.revealed_cells {
                    if owner != me {
                        c.known_opponent.insert(cell);
                        c.known_empty.remove(cell);
                    }
                }
                c.attempts_this_turn += 1;
                c.last_feedback = Some(illegal.clone());
            }
            _ => {}
        }
        self.events.push(event);
    }

    pub fn set_outcome(&mut self, outcome: GameOutcome) {
        self.outcome = Some(outcome);
    }

    pub fn spec(&self) -> GameSpec {
        self.spec
    }

    pub fn viewer(&self) -> PlayerId {
        self.viewer
    }

    pub fn events(&self) -> &[ObservationEvent] {
        &self.events
    }

    pub fn outcome(&self) -> Option<GameOutcome> {
        self.outcome
    }

    pub fn is_over(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn own_stones(&self) -> CellSet {
        self.cache.own
    }

    pub fn known_opponent_stones(&self) -> CellSet {
        self.cache.known_opponent
    }

    /// Cells known to be empty right now.
    pub fn known_empty(&self) -> CellSet {
        self.cache.known_empty
    }

    /// Every cell the viewer has attempted and been refused.
    pub fn tried_cells(&self) -> CellSet {
        self.cache.tried
    }

    /// Refused attempts in the viewer's current turn.
    pub fn tried_this_turn(&self) -> CellSet {
        self.cache.tried_this_turn
    }

    pub fn attempts_this_turn(&self) -> u32 {
        self.cache.attempts_this_turn
    }

    pub fn revealed_captures(&self) -> CellSet {
        self.cache.revealed_captures
    }

    pub fn opponent_placements(&self) -> u32 {
        self.cache.opponent_placements
    }

    /// Stones captured by `player` so far.
    pub fn prisoners(&self, player: PlayerId) -> u32 {
        self.cache.prisoners[player.index()]
    }

    /// Opponent stones on the board whose location the viewer does not know.
    pub fn hidden_opponent_count(&self) -> usize {
        let on_board = self.cache.opponent_placements - self.prisoners(self.viewer);
        on_board as usize - self.cache.known_opponent.len()
    }

    pub fn consecutive_passes(&self) -> u8 {
        self.cache.consecutive_passes
    }

    pub fn to_play(&self) -> PlayerId {
        self.cache.to_play
    }

    pub fn move_number(&self) -> u32 {
        self.cache.move_number
    }

    pub fn last_feedback(&self) -> Option<&MoveFeedback> {
        self.cache.last_feedback.as_ref()
    }

    /// Completed turns of the viewer, oldest first.
    pub fn turns(&self) -> &[TurnSnapshot] {
        &self.cache.turns
    }

    /// Per-turn snapshots most recent first. A turn in progress (events
    /// since the viewer's last legal move) comes first.
    pub fn recent_turns(&self) -> Vec<TurnSnapshot> {
        let c = &self.cache;
        let mut out = Vec::with_capacity(c.turns.len() + 1);
        if c.segment_events > 0 {
            out.push(TurnSnapshot {
                own: c.own,
                known_opponent: c.known_opponent,
                tried: c.segment_tried,
                captured: c.segment_captured,
            });
        }
        out.extend(c.turns.iter().rev().copied());
        out
    }

    /// Caches agree with a from-scratch replay of the events.
    pub fn caches_consistent(&self) -> bool {
        let fresh = ObservationHistory::replay(self.spec, self.viewer, &self.events, self.outcome);
        fresh.cache == self.cache
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameSpec, WorldState};

    fn drive(spec: GameSpec, attempts: &[(PlayerId, Action)]) -> (WorldState, [ObservationHistory; 2]) {
        let mut world = spec.initial_world().unwrap();
        let mut hs = [ObservationHistory::new(spec, PlayerId::First), ObservationHistory::new(spec, PlayerId::Second)];
        for &(actor, action) in attempts {
            let r = world.apply_attempt(actor, action).unwrap();
            for (h, e) in hs.iter_mut().zip(r.events) {
                if let Some(e) = e {
                    h.push(e);
                }
            }
            world = r.next;
        }
        (world, hs)
    }

    #[test]
    fn empty_history() {
        let h = ObservationHistory::new(GameSpec::dark_hex(3), PlayerId::First);
        assert_eq!(h.hidden_opponent_count(), 0);
        assert!(h.own_stones().is_empty());
        assert!(h.recent_turns().is_empty());
        assert_eq!(h.to_play(), PlayerId::First);
    }

    #[test]
    fn probe_reveals_stone_to_prober_only() {
        use PlayerId::*;
        let (_, [first, second]) = drive(GameSpec::dark_hex(3), &[(First, Action::Place(3)), (Second, Action::Place(3))]);
        assert_eq!(second.known_opponent_stones().to_vec(), vec![3]);
        assert_eq!(second.hidden_opponent_count(), 0);
        assert_eq!(second.tried_this_turn().to_vec(), vec![3]);
        assert_eq!(second.to_play(), Second);
        // First never hears about the refused attempt.
        assert_eq!(first.events().len(), 1);
        assert_eq!(first.hidden_opponent_count(), 0);
    }

    #[test]
    fn capture_reveal_decrements_hidden_count() {
        use PlayerId::*;
        // White hides a stone at 0, Black surrounds it and captures.
        let moves = [
            (First, Action::Place(1)),
            (Second, Action::Place(0)),
            (First, Action::Place(8)),
            (Second, Action::Place(7)),
        ];
        let (_, [black, _]) = drive(GameSpec::phantom_go(3), &moves);
        assert_eq!(black.hidden_opponent_count(), 2);
        let (_, [black, white]) = drive(GameSpec::phantom_go(3), &[&moves[..], &[(First, Action::Place(3))]].concat());
        assert_eq!(black.hidden_opponent_count(), 1);
        assert_eq!(black.prisoners(First), 1);
        assert!(black.known_empty().contains(0));
        assert!(white.known_empty().contains(0));
        assert_eq!(white.revealed_captures().to_vec(), vec![0]);
        assert!(black.caches_consistent() && white.caches_consistent());
    }

    #[test]
    fn turn_snapshots_most_recent_first() {
        use PlayerId::*;
        let moves = [
            (First, Action::Place(0)),
            (Second, Action::Place(0)),
            (Second, Action::Place(4)),
            (First, Action::Place(1)),
            (Second, Action::Place(8)),
            (First, Action::Place(2)),
            (Second, Action::Place(5)),
        ];
        let (_, [_, second]) = drive(GameSpec::dark_hex(3), &moves);
        let turns = second.recent_turns();
        assert_eq!(turns.len(), 3);
        assert_eq!(turns[0].own.to_vec(), vec![4, 5, 8]);
        assert_eq!(turns[2].own.to_vec(), vec![4]);
        assert_eq!(turns[2].tried.to_vec(), vec![0]);
        assert_eq!(turns[2].known_opponent.to_vec(), vec![0]);
        assert!(turns[0].tried.is_empty());
    }

    #[test]
    fn passes_are_public() {
        use PlayerId::*;
        let (_, [black, white]) = drive(GameSpec::phantom_go(3), &[(First, Action::Pass), (Second, Action::Place(4))]);
        assert_eq!(white.consecutive_passes(), 0);
        assert_eq!(black.opponent_placements(), 1);
        assert_eq!(white.opponent_placements(), 0);
        assert_eq!(white.hidden_opponent_count(), 0);
        assert_eq!(black.hidden_opponent_count(), 1);
    }
}
