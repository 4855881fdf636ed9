use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest supported board side; every board fits in a 128-bit cell set.
pub const MAX_BOARD_SIZE: usize = 11;

/// A set of board cells packed into a 128-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSet(u128);

impl CellSet {
    pub const EMPTY: CellSet = CellSet(0);

    pub fn from_bits(bits: u128) -> Self {
        CellSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    /// All cells `0..area`.
    pub fn full(area: usize) -> Self {
        if area >= 128 {
            CellSet(u128::MAX)
        } else {
            CellSet((1u128 << area) - 1)
        }
    }

    pub fn contains(self, cell: usize) -> bool {
        cell < 128 && (self.0 >> cell) & 1 == 1
    }

    pub fn insert(&mut self, cell: usize) {
        self.0 |= 1u128 << cell;
    }

    pub fn remove(&mut self, cell: usize) {
        self.0 &= !(1u128 << cell);
    }

    pub fn with(mut self, cell: usize) -> Self {
        self.insert(cell);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: CellSet) -> CellSet {
        CellSet(self.0 | other.0)
    }

    pub fn intersection(self, other: CellSet) -> CellSet {
        CellSet(self.0 & other.0)
    }

    pub fn difference(self, other: CellSet) -> CellSet {
        CellSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: CellSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: CellSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Cells in ascending order.
    pub fn iter(self) -> CellIter {
        CellIter(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for CellSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = CellSet::EMPTY;
        for cell in iter {
            set.insert(cell);
        }
        set
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct CellIter(u128);

impl Iterator for CellIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let cell = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(cell)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CellIter {}
