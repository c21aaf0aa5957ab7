use serde::{Deserialize, Serialize};

use crate::graphon::uniform_block;
use crate::scalar::{count, lit, Real};

/// Uniform discretization of the agent continuum into `m` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentGrid {
    m: usize,
}

impl AgentGrid {
    pub const DEFAULT_CELLS: usize = 64;

    pub fn new(m: usize) -> Self {
        assert!(m > 0, "agent grid needs at least one cell");
        Self { m }
    }

    pub fn cells(&self) -> usize {
        self.m
    }

    /// Midpoint `(i + 1/2) / m` of cell `i`.
    pub fn position<T: Real>(&self, i: usize) -> T {
        (count::<T>(i) + lit(0.5)) / count::<T>(self.m)
    }

    pub fn positions<T: Real>(&self) -> Vec<T> {
        (0..self.m).map(|i| self.position(i)).collect()
    }

    pub fn cell_width<T: Real>(&self) -> T {
        count::<T>(self.m).recip()
    }

    /// Cell containing `x` in `[0,1]`; its midpoint is also the nearest one.
    pub fn cell_of<T: Real>(&self, x: T) -> usize {
        uniform_block(x, self.m)
    }
}

impl Default for AgentGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CELLS)
    }
}
