use serde::{Deserialize, Serialize};

use crate::error::{GmfgError, Result};
use crate::flow::check_simplex;
use crate::graphon::check_permutation;
use crate::scalar::{count, Real};

/// Per-cell Markov policies `pi_h^i(a|s)`, stored `(cell, step, state, action)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile<T> {
    cells: usize,
    horizon: usize,
    states: usize,
    actions: usize,
    data: Vec<T>,
}

impl<T: Real> PolicyProfile<T> {
    pub fn uniform(cells: usize, horizon: usize, states: usize, actions: usize) -> Self {
        let p = count::<T>(actions).recip();
        Self {
            cells,
            horizon,
            states,
            actions,
            data: vec![p; cells * horizon * states * actions],
        }
    }

    /// Same per-state action distribution `rows[s]` at every cell and step.
    pub fn stationary(cells: usize, horizon: usize, rows: &[Vec<T>]) -> Result<Self> {
        let states = rows.len();
        let actions = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(cells * horizon * states * actions);
        for _ in 0..cells * horizon {
            for row in rows {
                if row.len() != actions {
                    return Err(GmfgError::ShapeMismatch("ragged policy rows".into()));
                }
                data.extend_from_slice(row);
            }
        }
        Self::from_vec(cells, horizon, states, actions, data)
    }

    pub fn from_vec(
        cells: usize,
        horizon: usize,
        states: usize,
        actions: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        if data.len() != cells * horizon * states * actions {
            return Err(GmfgError::ShapeMismatch(format!(
                "policy data has {} entries, expected {}",
                data.len(),
                cells * horizon * states * actions
            )));
        }
        let p = Self {
            cells,
            horizon,
            states,
            actions,
            data,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    fn offset(&self, cell: usize, h: usize, s: usize) -> usize {
        ((cell * self.horizon + h) * self.states + s) * self.actions
    }

    #[inline]
    pub fn row(&self, cell: usize, h: usize, s: usize) -> &[T] {
        let o = self.offset(cell, h, s);
        &self.data[o..o + self.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, cell: usize, h: usize, s: usize) -> &mut [T] {
        let o = self.offset(cell, h, s);
        &mut self.data[o..o + self.actions]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.cells == other.cells
            && self.horizon == other.horizon
            && self.states == other.states
            && self.actions == other.actions
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(GmfgError::ShapeMismatch(
                "policy profiles differ in shape".into(),
            ))
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.cells {
            for h in 0..self.horizon {
                for s in 0..self.states {
                    check_simplex(self.row(i, h, s), || {
                        format!("policy cell {i} step {h} state {s}")
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn min_probability(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    /// Cell `i` of the result plays the policy of cell `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm)?;
        if perm.len() != self.cells {
            return Err(GmfgError::ShapeMismatch(format!(
                "permutation of {} cells applied to policy with {} cells",
                perm.len(),
                self.cells
            )));
        }
        let block = self.horizon * self.states * self.actions;
        let mut data = Vec::with_capacity(self.data.len());
        for &src in perm {
            data.extend_from_slice(&self.data[src * block..(src + 1) * block]);
        }
        Ok(Self { data, ..*self })
    }

    /// Entrywise `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &Self, weight: T) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let keep = T::one() - weight;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| keep * a + weight * b)
            .collect();
        Ok(Self { data, ..*self })
    }
}
