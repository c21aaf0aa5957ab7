use serde::{Deserialize, Serialize};

use crate::error::{EstimationError, Result};

/// How the `N` sampled agents sit on `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositionScheme {
    /// Agent `i` (0-based) at `(i + 1) / n`.
    KnownGrid { n: usize },
    /// Recorded i.i.d. uniform positions.
    KnownRandom { positions: Vec<f64> },
    /// Positions form the grid `{(i + 1) / n}` but agent labels do not reveal which is whose.
    UnknownGrid { n: usize },
}

/// Grid position of slot `i` out of `n`.
pub fn grid_position(i: usize, n: usize) -> f64 {
    (i + 1) as f64 / n as f64
}

impl PositionScheme {
    pub fn n(&self) -> usize {
        match self {
            Self::KnownGrid { n } | Self::UnknownGrid { n } => *n,
            Self::KnownRandom { positions } => positions.len(),
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Self::UnknownGrid { .. })
    }

    /// Nominal positions; under `UnknownGrid` these are the grid slots in label order.
    pub fn positions(&self) -> Vec<f64> {
        match self {
            Self::KnownGrid { n } | Self::UnknownGrid { n } => {
                (0..*n).map(|i| grid_position(i, *n)).collect()
            }
            Self::KnownRandom { positions } => positions.clone(),
        }
    }

    /// Positions with agent `i` moved to slot `perm[i]` (grid schemes only).
    pub fn positions_under(&self, perm: Option<&[usize]>) -> Result<Vec<f64>> {
        match (self, perm) {
            (_, None) => Ok(self.positions()),
            (Self::UnknownGrid { n }, Some(p)) => {
                gmfg_core::permute::validate_permutation(p)?;
                if p.len() != *n {
                    return Err(EstimationError::Scheme(format!(
                        "permutation of {} for {n} agents",
                        p.len()
                    )));
                }
                Ok(p.iter().map(|&slot| grid_position(slot, *n)).collect())
            }
            (_, Some(_)) => Err(EstimationError::Scheme(
                "agent permutations apply only to unknown grid positions".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(EstimationError::TooFewAgents(self.n()));
        }
        if let Self::KnownRandom { positions } = self {
            if let Some(p) = positions.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
                return Err(EstimationError::Scheme(format!(
                    "random position {p} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}
