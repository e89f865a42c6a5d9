//! Deterministic operation counts. One operation is one multiply-add.

use std::ops::AddAssign;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Anterpolation and interpolation sweeps.
    pub transfers: u64,
    /// Dense summation on the coarsest grid.
    pub coarse: u64,
    /// Local correction sums, including their own transfers.
    pub corrections: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.transfers + self.coarse + self.corrections
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, o: Self) {
        self.transfers += o.transfers;
        self.coarse += o.coarse;
        self.corrections += o.corrections;
    }
}
