use serde::{Deserialize, Serialize};

use crate::error::{GmfgError, Result};
use crate::graphon::check_permutation;
use crate::scalar::{lit, Real};

/// Tolerance for "sums to one": `1e-12` in double precision, looser for `f32`.
pub fn simplex_tol<T: Real>() -> T {
    (T::epsilon() * lit(100.0)).max(lit(1e-12))
}

pub(crate) fn check_simplex<T: Real>(v: &[T], what: impl FnOnce() -> String) -> Result<()> {
    let mut total = T::zero();
    for &p in v {
        if !(p >= T::zero()) || !p.is_finite() {
            return Err(GmfgError::NotSimplex(format!("{}: entry {p}", what())));
        }
        total += p;
    }
    if (total - T::one()).abs() > simplex_tol::<T>() {
        return Err(GmfgError::NotSimplex(format!(
            "{}: sums to {total}",
            what()
        )));
    }
    Ok(())
}

/// Per-cell, per-step state distributions `mu_h^i`, stored `(cell, step, state)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFlow<T> {
    cells: usize,
    horizon: usize,
    states: usize,
    data: Vec<T>,
}

impl<T: Real> DistributionFlow<T> {
    pub fn zeros(cells: usize, horizon: usize, states: usize) -> Self {
        Self {
            cells,
            horizon,
            states,
            data: vec![T::zero(); cells * horizon * states],
        }
    }

    /// Every `(cell, step)` slice equal to `dist`.
    pub fn replicate(dist: &[T], cells: usize, horizon: usize) -> Self {
        let states = dist.len();
        let mut data = Vec::with_capacity(cells * horizon * states);
        for _ in 0..cells * horizon {
            data.extend_from_slice(dist);
        }
        Self {
            cells,
            horizon,
            states,
            data,
        }
    }

    pub fn from_vec(cells: usize, horizon: usize, states: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != cells * horizon * states {
            return Err(GmfgError::ShapeMismatch(format!(
                "flow data has {} entries, expected {}",
                data.len(),
                cells * horizon * states
            )));
        }
        let flow = Self {
            cells,
            horizon,
            states,
            data,
        };
        flow.validate()?;
        Ok(flow)
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    fn offset(&self, cell: usize, h: usize) -> usize {
        (cell * self.horizon + h) * self.states
    }

    #[inline]
    pub fn dist(&self, cell: usize, h: usize) -> &[T] {
        let o = self.offset(cell, h);
        &self.data[o..o + self.states]
    }

    #[inline]
    pub fn dist_mut(&mut self, cell: usize, h: usize) -> &mut [T] {
        let o = self.offset(cell, h);
        &mut self.data[o..o + self.states]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.cells == other.cells && self.horizon == other.horizon && self.states == other.states
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(GmfgError::ShapeMismatch(format!(
                "flows ({}, {}, {}) vs ({}, {}, {})",
                self.cells, self.horizon, self.states, other.cells, other.horizon, other.states
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.cells {
            for h in 0..self.horizon {
                check_simplex(self.dist(i, h), || format!("flow cell {i} step {h}"))?;
            }
        }
        Ok(())
    }

    /// `(1 - weight) * self + weight * other`.
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

    /// Cell `i` of the result carries cell `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm)?;
        if perm.len() != self.cells {
            return Err(GmfgError::ShapeMismatch(format!(
                "permutation of {} cells applied to flow with {} cells",
                perm.len(),
                self.cells
            )));
        }
        let mut out = Self::zeros(self.cells, self.horizon, self.states);
        for (i, &src) in perm.iter().enumerate() {
            for h in 0..self.horizon {
                out.dist_mut(i, h).copy_from_slice(self.dist(src, h));
            }
        }
        Ok(out)
    }

    /// Cell-average `(1/M) sum_i mu_h^i`.
    pub fn grid_mean(&self, h: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.states];
        let w = T::from_usize(self.cells).unwrap().recip();
        for i in 0..self.cells {
            for (o, &p) in out.iter_mut().zip(self.dist(i, h)) {
                *o += w * p;
            }
        }
        out
    }
}
