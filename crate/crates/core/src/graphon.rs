//! Symmetric interaction kernels on the unit square.

use serde::{Deserialize, Serialize};

use crate::error::{GmfgError, Result};
use crate::scalar::{count, lit, Real};

/// Symmetric measurable map `[0,1]^2 -> [0,1]`.
///
/// `Block` partitions `[0,1]` at sorted interior cut points; `Step` uses `m`
/// uniform blocks. `Permuted` is the image of a base graphon under a
/// permutation of `m` uniform intervals, `W'(x,y) = W(phi(x), phi(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Graphon<T> {
    Constant {
        p: T,
    },
    Exp {
        theta: T,
    },
    Block {
        boundaries: Vec<T>,
        values: Vec<Vec<T>>,
    },
    Step {
        values: Vec<Vec<T>>,
    },
    Permuted {
        base: Box<Graphon<T>>,
        perm: Vec<usize>,
    },
}

impl<T: Real> Graphon<T> {
    pub fn constant(p: T) -> Result<Self> {
        let g = Graphon::Constant { p };
        g.validate()?;
        Ok(g)
    }

    pub fn exp(theta: T) -> Result<Self> {
        let g = Graphon::Exp { theta };
        g.validate()?;
        Ok(g)
    }

    pub fn step(values: Vec<Vec<T>>) -> Result<Self> {
        let g = Graphon::Step { values };
        g.validate()?;
        Ok(g)
    }

    pub fn block(boundaries: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        let g = Graphon::Block { boundaries, values };
        g.validate()?;
        Ok(g)
    }

    /// Stochastic block model with `blocks` equal communities.
    pub fn sbm(blocks: usize, intra: T, inter: T) -> Result<Self> {
        if blocks == 0 {
            return Err(GmfgError::InvalidGraphon(
                "sbm needs at least one block".into(),
            ));
        }
        let values = (0..blocks)
            .map(|i| {
                (0..blocks)
                    .map(|j| if i == j { intra } else { inter })
                    .collect()
            })
            .collect();
        Self::step(values)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T, what: &str| -> Result<()> {
            if v.is_finite() && v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(GmfgError::InvalidGraphon(format!(
                    "{what} value {v} outside [0,1]"
                )))
            }
        };
        match self {
            Graphon::Constant { p } => unit(*p, "constant"),
            Graphon::Exp { theta } => {
                if theta.is_finite() && *theta > T::zero() {
                    Ok(())
                } else {
                    Err(GmfgError::InvalidGraphon(format!(
                        "exp parameter {theta} must be positive"
                    )))
                }
            }
            Graphon::Step { values } => validate_matrix(values, "step"),
            Graphon::Block { boundaries, values } => {
                validate_matrix(values, "block")?;
                if values.len() != boundaries.len() + 1 {
                    return Err(GmfgError::InvalidGraphon(format!(
                        "{} boundaries need {} blocks, got {}",
                        boundaries.len(),
                        boundaries.len() + 1,
                        values.len()
                    )));
                }
                let mut prev = T::zero();
                for &b in boundaries {
                    if !(b > prev && b < T::one()) {
                        return Err(GmfgError::InvalidGraphon(
                            "block boundaries must be strictly increasing in (0,1)".into(),
                        ));
                    }
                    prev = b;
                }
                Ok(())
            }
            Graphon::Permuted { base, perm } => {
                check_permutation(perm)?;
                base.validate()
            }
        }
    }

    /// Evaluates `W(x, y)`.
    pub fn eval(&self, x: T, y: T) -> T {
        match self {
            Graphon::Constant { p } => *p,
            Graphon::Exp { theta } => {
                let e = (*theta * (x * y)).exp();
                if e.is_infinite() {
                    return T::one();
                }
                lit::<T>(2.0) * e / (T::one() + e) - T::one()
            }
            Graphon::Step { values } => {
                let m = values.len();
                values[uniform_block(x, m)][uniform_block(y, m)]
            }
            Graphon::Block { boundaries, values } => {
                let bx = boundaries.iter().take_while(|&&b| b < x).count();
                let by = boundaries.iter().take_while(|&&b| b < y).count();
                values[bx][by]
            }
            Graphon::Permuted { base, perm } => base.eval(block_map(perm, x), block_map(perm, y)),
        }
    }

    /// Image under the interval permutation `perm`: cell `i` of the result
    /// behaves like cell `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm)?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        Ok(match self {
            Graphon::Constant { .. } => self.clone(),
            Graphon::Step { values } if values.len() == perm.len() => Graphon::Step {
                values: perm
                    .iter()
                    .map(|&pi| perm.iter().map(|&pj| values[pi][pj]).collect())
                    .collect(),
            },
            Graphon::Permuted { base, perm: inner } if inner.len() == perm.len() => {
                // W^inner then perm: x in cell i -> cell inner[perm[i]]
                let composed: Vec<usize> = perm.iter().map(|&p| inner[p]).collect();
                if composed.iter().enumerate().all(|(i, &p)| i == p) {
                    (**base).clone()
                } else {
                    Graphon::Permuted {
                        base: base.clone(),
                        perm: composed,
                    }
                }
            }
            _ => Graphon::Permuted {
                base: Box::new(self.clone()),
                perm: perm.to_vec(),
            },
        })
    }

    /// Matrix `W(x_i, x_j)` over the given positions.
    pub fn matrix(&self, positions: &[T]) -> Vec<Vec<T>> {
        positions
            .iter()
            .map(|&x| positions.iter().map(|&y| self.eval(x, y)).collect())
            .collect()
    }

    pub fn is_constant(&self) -> Option<T> {
        match self {
            Graphon::Constant { p } => Some(*p),
            Graphon::Permuted { base, .. } => base.is_constant(),
            _ => None,
        }
    }
}

fn validate_matrix<T: Real>(values: &[Vec<T>], what: &str) -> Result<()> {
    let m = values.len();
    if m == 0 {
        return Err(GmfgError::InvalidGraphon(format!(
            "{what} graphon has no blocks"
        )));
    }
    for (i, row) in values.iter().enumerate() {
        if row.len() != m {
            return Err(GmfgError::InvalidGraphon(format!(
                "{what} matrix is not square"
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !(v.is_finite() && v >= T::zero() && v <= T::one()) {
                return Err(GmfgError::InvalidGraphon(format!(
                    "{what} value {v} outside [0,1]"
                )));
            }
            if v != values[j][i] {
                return Err(GmfgError::InvalidGraphon(format!(
                    "{what} matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_permutation(perm: &[usize]) -> Result<()> {
    let n = perm.len();
    if n == 0 {
        return Err(GmfgError::NotBijection {
            len: 0,
            reason: "empty permutation".into(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n {
            return Err(GmfgError::NotBijection {
                len: n,
                reason: format!("image {p} out of range"),
            });
        }
        if seen[p] {
            return Err(GmfgError::NotBijection {
                len: n,
                reason: format!("image {p} repeated"),
            });
        }
        seen[p] = true;
    }
    Ok(())
}

/// Index of the uniform block of `[0,1]` (out of `m`) containing `x`. Blocks are
/// `((k-1)/m, k/m]`, so a grid point `k/m` belongs to block `k - 1` and `0` to block 0.
pub fn uniform_block<T: Real>(x: T, m: usize) -> usize {
    let y = x * count::<T>(m);
    let r = y.round();
    let k = if (y - r).abs() <= T::epsilon() * lit(64.0) * r.max(T::one()) {
        r - T::one()
    } else {
        y.floor()
    };
    k.to_usize().unwrap_or(0).min(m - 1)
}

/// Image of `x` under the interval permutation sending block `i` onto block `perm[i]`.
pub fn block_map<T: Real>(perm: &[usize], x: T) -> T {
    let m = perm.len();
    let i = uniform_block(x, m);
    let width = count::<T>(m).recip();
    x + (count::<T>(perm[i]) - count::<T>(i)) * width
}
