//! Dark Hex: Hex on a rhombic board where placements are hidden from the
//! opponent. First connects the top and bottom rows, Second connects the
//! left and right columns. There is no swap rule.

use std::collections::VecDeque;

use super::{CellSet, MoveFeedback, PlayerId};

const TOP: usize = 0;
const BOTTOM: usize = 1;
const LEFT: usize = 2;
const RIGHT: usize = 3;

/// Row/column offsets of the six hex neighbours.
const HEX_OFFSETS: [(isize, isize); 6] = [(-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0)];

/// Hex-adjacent cells of `cell` on a `size`×`size` rhombus, ascending.
pub fn hex_neighbors(cell: usize, size: usize) -> Vec<usize> {
    let (row, col) = ((cell / size) as isize, (cell % size) as isize);
    let n = size as isize;
    let mut out: Vec<usize> = HEX_OFFSETS
        .iter()
        .map(|&(dr, dc)| (row + dr, col + dc))
        .filter(|&(r, c)| r >= 0 && r < n && c >= 0 && c < n)
        .map(|(r, c)| (r * n + c) as usize)
        .collect();
    out.sort_unstable();
    out
}

/// Disjoint sets over the cells plus four virtual border nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
struct UnionFind {
    parent: Vec<u8>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(nodes: usize) -> Self {
        UnionFind { parent: (0..nodes as u8).collect(), rank: vec![0; nodes] }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            x = self.parent[x] as usize;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u8,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u8,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u8;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HexWorld {
    size: u8,
    stones: [CellSet; 2],
    known: [CellSet; 2],
    to_play: PlayerId,
    move_number: u32,
    uf: UnionFind,
}

impl HexWorld {
    pub fn new(size: usize) -> Self {
        let area = size * size;
        HexWorld {
            size: size as u8,
            stones: [CellSet::EMPTY; 2],
            known: [CellSet::EMPTY; 2],
            to_play: PlayerId::First,
            move_number: 0,
            uf: UnionFind::new(area + 4),
        }
    }

    /// Position with the given stones. `known[p]` lists opponent stones
    /// player `p` has discovered; it is clipped to actual opponent stones.
    pub fn from_stones(
        size: usize,
        first: CellSet,
        second: CellSet,
        to_play: PlayerId,
        move_number: u32,
        known: [CellSet; 2],
    ) -> Self {
        let mut w = HexWorld::new(size);
        w.stones = [first, second];
        w.known = [known[0].intersection(second), known[1].intersection(first)];
        w.to_play = to_play;
        w.move_number = move_number;
        w.uf = w.rebuild_union_find();
        w
    }

    /// Fixture helper: adds a stone without touching turn bookkeeping.
    pub fn with_stone(&self, cell: usize, player: PlayerId) -> Self {
        let mut w = self.clone();
        w.stones[player.index()].insert(cell);
        w.connect(cell, player);
        w
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn area(&self) -> usize {
        self.size() * self.size()
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

    pub fn owner(&self, cell: usize) -> Option<PlayerId> {
        PlayerId::BOTH.into_iter().find(|&p| self.stones(p).contains(cell))
    }

    fn border_nodes(&self, player: PlayerId) -> (usize, usize) {
        let area = self.area();
        match player {
            PlayerId::First => (area + TOP, area + BOTTOM),
            PlayerId::Second => (area + LEFT, area + RIGHT),
        }
    }

    fn connect(&mut self, cell: usize, player: PlayerId) {
        let n = self.size();
        let area = self.area();
        let (row, col) = (cell / n, cell % n);
        for nb in hex_neighbors(cell, n) {
            if self.stones(player).contains(nb) {
                self.uf.union(cell, nb);
            }
        }
        match player {
            PlayerId::First => {
                if row == 0 {
                    self.uf.union(cell, area + TOP);
                }
                if row == n - 1 {
                    self.uf.union(cell, area + BOTTOM);
                }
            }
            PlayerId::Second => {
                if col == 0 {
                    self.uf.union(cell, area + LEFT);
                }
                if col == n - 1 {
                    self.uf.union(cell, area + RIGHT);
                }
            }
        }
    }

    fn rebuild_union_find(&self) -> UnionFind {
        let mut scratch = HexWorld::new(self.size());
        for player in PlayerId::BOTH {
            for cell in self.stones(player).iter() {
                scratch.stones[player.index()].insert(cell);
                scratch.connect(cell, player);
            }
        }
        scratch.uf
    }

    /// Player whose two borders are joined by a chain, if any.
    pub fn winner(&self) -> Option<PlayerId> {
        PlayerId::BOTH.into_iter().find(|&p| {
            let (a, b) = self.border_nodes(p);
            self.uf.find(a) == self.uf.find(b)
        })
    }

    /// Referee step for the player to move. Occupied cells are rejected
    /// and the position is unchanged.
    pub fn attempt(&self, cell: usize) -> (MoveFeedback, Option<HexWorld>) {
        if self.owner(cell).is_some() {
            return (MoveFeedback::IllegalOccupied, None);
        }
        let mut next = self.clone();
        let me = self.to_play;
        next.stones[me.index()].insert(cell);
        next.connect(cell, me);
        next.to_play = me.opponent();
        next.move_number += 1;
        (MoveFeedback::legal(), Some(next))
    }

    /// Recording that `player` discovered the opponent stone at `cell`.
    pub fn with_known(&self, player: PlayerId, cell: usize) -> Self {
        let mut w = self.clone();
        if w.stones(player.opponent()).contains(cell) {
            w.known[player.index()].insert(cell);
        }
        w
    }

    /// Union-find components agree with a rebuild from the stones alone.
    pub fn connectivity_consistent(&self) -> bool {
        let fresh = self.rebuild_union_find();
        let area = self.area();
        (0..area + 4).all(|a| {
            (0..area + 4).all(|b| (self.uf.find(a) == self.uf.find(b)) == (fresh.find(a) == fresh.find(b)))
        })
    }

    pub fn render(&self) -> String {
        let n = self.size();
        let mut out = String::new();
        for row in 0..n {
            out.push_str(&" ".repeat(row));
            let cells: Vec<&str> = (0..n)
                .map(|col| match self.owner(row * n + col) {
                    None => ".",
                    Some(PlayerId::First) => "X",
                    Some(PlayerId::Second) => "O",
                })
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Winner by breadth-first search over same-owner adjacency, independent of
/// the incremental union-find.
pub fn bfs_winner(size: usize, stones: [CellSet; 2]) -> Option<PlayerId> {
    PlayerId::BOTH.into_iter().find(|&p| {
        let own = stones[p.index()];
        let starts = (0..size).map(|i| match p {
            PlayerId::First => i,
            PlayerId::Second => i * size,
        });
        let is_goal = |c: usize| match p {
            PlayerId::First => c / size == size - 1,
            PlayerId::Second => c % size == size - 1,
        };
        let mut seen = CellSet::EMPTY;
        let mut queue = VecDeque::new();
        for s in starts.filter(|&s| own.contains(s)) {
            seen.insert(s);
            queue.push_back(s);
        }
        while let Some(c) = queue.pop_front() {
            if is_goal(c) {
                return true;
            }
            for nb in hex_neighbors(c, size) {
                if own.contains(nb) && !seen.contains(nb) {
                    seen.insert(nb);
                    queue.push_back(nb);
                }
            }
        }
        false
    })
}
