//! Feature planes for the network.
//!
//! Layouts (channel order is part of the checkpoint contract):
//!
//! * state (6): our stones, opponent stones, perspective-is-First,
//!   perspective-is-Second, opponent stones known to us, our stones known to
//!   the opponent.
//! * board4: the first four state planes.
//! * history: eight most recent viewer turns of own-stone snapshots, then
//!   eight of known-opponent snapshots, then (Phantom Go) eight tried-cell
//!   and eight captured-cell blocks, then the two turn planes.

use crate::game::{CellSet, GameKind, GameSpec, ObservationHistory, PlayerId, WorldState};

pub const STATE_CHANNELS: usize = 6;
pub const BOARD_CHANNELS: usize = 4;
pub const HISTORY_TURNS: usize = 8;

/// Channels produced by [`encode_history`] for a game.
pub fn history_channels(kind: GameKind) -> usize {
    match kind {
        GameKind::PhantomGo => 4 * HISTORY_TURNS + 2,
        GameKind::DarkHex => 2 * HISTORY_TURNS + 2,
    }
}

/// Binary planes laid out row-major by (channel, row, col).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneTensor {
    pub channels: usize,
    pub size: usize,
    pub data: Vec<f32>,
}

impl PlaneTensor {
    pub fn zeros(channels: usize, size: usize) -> Self {
        PlaneTensor { channels, size, data: vec![0.0; channels * size * size] }
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let a = self.size * self.size;
        &self.data[channel * a..(channel + 1) * a]
    }

    fn set_cells(&mut self, channel: usize, cells: CellSet) {
        let a = self.size * self.size;
        for c in cells.iter() {
            self.data[channel * a + c] = 1.0;
        }
    }

    fn fill(&mut self, channel: usize) {
        let a = self.size * self.size;
        self.data[channel * a..(channel + 1) * a].fill(1.0);
    }

    /// Cells set to one in `channel`.
    pub fn cells(&self, channel: usize) -> CellSet {
        self.plane(channel).iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect()
    }

    /// First `channels` channels.
    pub fn truncated(&self, channels: usize) -> PlaneTensor {
        let a = self.size * self.size;
        PlaneTensor { channels, size: self.size, data: self.data[..channels * a].to_vec() }
    }
}

fn turn_channel(perspective: PlayerId) -> usize {
    perspective.index()
}

pub fn encode_state(world: &WorldState, perspective: PlayerId) -> PlaneTensor {
    let opp = perspective.opponent();
    let mut t = PlaneTensor::zeros(STATE_CHANNELS, world.size());
    t.set_cells(0, world.stones(perspective));
    t.set_cells(1, world.stones(opp));
    t.fill(2 + turn_channel(perspective));
    t.set_cells(4, world.known_by(perspective));
    t.set_cells(5, world.known_by(opp));
    t
}

pub fn encode_board4(world: &WorldState, perspective: PlayerId) -> PlaneTensor {
    let opp = perspective.opponent();
    let mut t = PlaneTensor::zeros(BOARD_CHANNELS, world.size());
    t.set_cells(0, world.stones(perspective));
    t.set_cells(1, world.stones(opp));
    t.fill(2 + turn_channel(perspective));
    t
}

pub fn encode_history(history: &ObservationHistory) -> PlaneTensor {
    let spec: GameSpec = history.spec();
    let channels = history_channels(spec.kind);
    let mut t = PlaneTensor::zeros(channels, spec.size);
    let h = HISTORY_TURNS;
    for (i, turn) in history.recent_turns().iter().take(h).enumerate() {
        t.set_cells(i, turn.own);
        t.set_cells(h + i, turn.known_opponent);
        if spec.kind == GameKind::PhantomGo {
            t.set_cells(2 * h + i, turn.tried);
            t.set_cells(3 * h + i, turn.captured);
        }
    }
    t.fill(channels - 2 + turn_channel(history.viewer()));
    t
}
