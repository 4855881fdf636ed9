//! Phantom Go: standard Go with hidden placements. The referee rejects
//! occupied, suicide and simple-ko attempts; captures are announced to both
//! players. Games end after two consecutive passes (or at the move limit)
//! and are scored by area with komi credited to White.

use super::{Action, CellSet, GameOutcome, GameResult, MoveFeedback, PlayerId};

/// Orthogonal neighbours of `cell` on a `size`×`size` board.
pub fn go_neighbors(cell: usize, size: usize) -> impl Iterator<Item = usize> {
    let (row, col) = (cell / size, cell % size);
    let up = (row > 0).then(|| cell - size);
    let down = (row + 1 < size).then(|| cell + size);
    let left = (col > 0).then(|| cell - 1);
    let right = (col + 1 < size).then(|| cell + 1);
    [up, left, right, down].into_iter().flatten()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoWorld {
    size: u8,
    komi: f64,
    stones: [CellSet; 2],
    known: [CellSet; 2],
    to_play: PlayerId,
    ko_point: Option<u8>,
    consecutive_passes: u8,
    prisoners: [u32; 2],
    move_number: u32,
}

impl GoWorld {
    pub fn new(size: usize, komi: f64) -> Self {
        GoWorld {
            size: size as u8,
            komi,
            stones: [CellSet::EMPTY; 2],
            known: [CellSet::EMPTY; 2],
            to_play: PlayerId::First,
            ko_point: None,
            consecutive_passes: 0,
            prisoners: [0; 2],
            move_number: 0,
        }
    }

    /// Position from explicit stones; no ko point. `known` is clipped to
    /// actual opponent stones.
    #[allow(clippy::too_many_arguments)]
    pub fn from_stones(
        size: usize,
        komi: f64,
        black: CellSet,
        white: CellSet,
        to_play: PlayerId,
        move_number: u32,
        consecutive_passes: u8,
        prisoners: [u32; 2],
        known: [CellSet; 2],
    ) -> Self {
        GoWorld {
            size: size as u8,
            komi,
            stones: [black, white],
            known: [known[0].intersection(white), known[1].intersection(black)],
            to_play,
            ko_point: None,
            consecutive_passes,
            prisoners,
            move_number,
        }
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn area(&self) -> usize {
        self.size() * self.size()
    }

    pub fn komi(&self) -> f64 {
        self.komi
    }

    pub fn to_play(&self) -> PlayerId {
        self.to_play
    }

    pub fn move_number(&self) -> u32 {
        self.move_number
    }

    pub fn stones(&self, player: PlayerId) -> CellSet {
        self.stones[player.index()]
    }

    pub fn known_by(&self, player: PlayerId) -> CellSet {
        self.known[player.index()]
    }

    pub fn ko_point(&self) -> Option<usize> {
        self.ko_point.map(usize::from)
    }

    pub fn consecutive_passes(&self) -> u8 {
        self.consecutive_passes
    }

    pub fn prisoners(&self, player: PlayerId) -> u32 {
        self.prisoners[player.index()]
    }

    fn occupied(&self) -> CellSet {
        self.stones[0].union(self.stones[1])
    }

    /// The chain containing `cell` and its liberties, for stones in `own`.
    fn chain(&self, stones: [CellSet; 2], cell: usize, player: PlayerId) -> (CellSet, CellSet) {
        let own = stones[player.index()];
        let occupied = stones[0].union(stones[1]);
        let mut group = CellSet::EMPTY.with(cell);
        let mut liberties = CellSet::EMPTY;
        let mut stack = vec![cell];
        while let Some(c) = stack.pop() {
            for nb in go_neighbors(c, self.size()) {
                if own.contains(nb) {
                    if !group.contains(nb) {
                        group.insert(nb);
                        stack.push(nb);
                    }
                } else if !occupied.contains(nb) {
                    liberties.insert(nb);
                }
            }
        }
        (group, liberties)
    }

    /// Feedback the referee would give for placing at `cell`.
    pub fn placement(&self, cell: usize) -> MoveFeedback {
        self.attempt(Action::Place(cell)).0
    }

    /// Referee step for the player to move.
    pub fn attempt(&self, action: Action) -> (MoveFeedback, Option<GoWorld>) {
        let me = self.to_play;
        let opp = me.opponent();
        let cell = match action {
            Action::Pass => {
                let mut next = self.clone();
                next.consecutive_passes = (self.consecutive_passes + 1).min(2);
                next.ko_point = None;
                next.to_play = opp;
                next.move_number += 1;
                return (MoveFeedback::legal(), Some(next));
            }
            Action::Place(cell) => cell,
        };
        if self.occupied().contains(cell) {
            return (MoveFeedback::IllegalOccupied, None);
        }
        if self.ko_point() == Some(cell) {
            return (MoveFeedback::IllegalKo, None);
        }
        let mut stones = self.stones;
        stones[me.index()].insert(cell);
        let mut captured = CellSet::EMPTY;
        for nb in go_neighbors(cell, self.size()) {
            if stones[opp.index()].contains(nb) && !captured.contains(nb) {
                let (group, libs) = self.chain(stones, nb, opp);
                if libs.is_empty() {
                    captured = captured.union(group);
                }
            }
        }
        stones[opp.index()] = stones[opp.index()].difference(captured);
        let (own_group, own_libs) = self.chain(stones, cell, me);
        if own_libs.is_empty() {
            return (MoveFeedback::IllegalSuicide, None);
        }
        let mut next = self.clone();
        next.stones = stones;
        next.known[me.index()] = next.known[me.index()].difference(captured);
        next.ko_point = (captured.len() == 1 && own_group.len() == 1 && own_libs.len() == 1)
            .then(|| captured.iter().next().unwrap() as u8);
        next.consecutive_passes = 0;
        next.prisoners[me.index()] += captured.len() as u32;
        next.to_play = opp;
        next.move_number += 1;
        (MoveFeedback::Legal { captured: captured.to_vec() }, Some(next))
    }

    pub fn with_known(&self, player: PlayerId, cell: usize) -> Self {
        let mut w = self.clone();
        if w.stones(player.opponent()).contains(cell) {
            w.known[player.index()].insert(cell);
        }
        w
    }

    /// Every chain on the board has at least one liberty.
    pub fn all_groups_alive(&self) -> bool {
        PlayerId::BOTH.into_iter().all(|p| {
            let mut done = CellSet::EMPTY;
            self.stones(p).iter().all(|c| {
                if done.contains(c) {
                    return true;
                }
                let (group, libs) = self.chain(self.stones, c, p);
                done = done.union(group);
                !libs.is_empty()
            })
        })
    }

    /// Black area minus White area minus komi. Empty regions count for a
    /// colour only when every bordering stone has that colour.
    pub fn score_area(&self) -> f64 {
        let (black, white) = area_counts(self.size(), self.stones);
        black as f64 - white as f64 - self.komi
    }

    pub fn is_over(&self) -> bool {
        self.consecutive_passes >= 2 || self.move_number >= 4 * self.area() as u32
    }

    pub fn terminal_outcome(&self) -> Option<GameOutcome> {
        if !self.is_over() {
            return None;
        }
        let margin = self.score_area();
        let result = if margin > 0.0 {
            GameResult::Win(PlayerId::First)
        } else if margin < 0.0 {
            GameResult::Win(PlayerId::Second)
        } else {
            GameResult::Draw
        };
        Some(GameOutcome { result, score_margin: Some(margin) })
    }

    pub fn render(&self) -> String {
        let n = self.size();
        let mut out = String::new();
        for row in 0..n {
            let line: Vec<&str> = (0..n)
                .map(|col| {
                    let c = row * n + col;
                    if self.stones[0].contains(c) {
                        "X"
                    } else if self.stones[1].contains(c) {
                        "O"
                    } else {
                        "."
                    }
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// (Black area, White area) by flood-filling empty regions.
pub fn area_counts(size: usize, stones: [CellSet; 2]) -> (usize, usize) {
    let occupied = stones[0].union(stones[1]);
    let mut counts = [stones[0].len(), stones[1].len()];
    let mut seen = CellSet::EMPTY;
    for start in CellSet::full(size * size).difference(occupied).iter() {
        if seen.contains(start) {
            continue;
        }
        let mut region = 0usize;
        let mut borders = [false; 2];
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(c) = stack.pop() {
            region += 1;
            for nb in go_neighbors(c, size) {
                if stones[0].contains(nb) {
                    borders[0] = true;
                } else if stones[1].contains(nb) {
                    borders[1] = true;
                } else if !seen.contains(nb) {
                    seen.insert(nb);
                    stack.push(nb);
                }
            }
        }
        match borders {
            [true, false] => counts[0] += region,
            [false, true] => counts[1] += region,
            _ => {}
        }
    }
    (counts[0], counts[1])
}
