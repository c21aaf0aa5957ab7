//! Block permutations of the agent grid acting on graphons, policies and flows.

use crate::error::Result;
use crate::flow::DistributionFlow;
use crate::graphon::{check_permutation, Graphon};
use crate::policy::PolicyProfile;
use crate::scalar::Real;

/// Objects relabeled by a permutation of the `M` grid cells: cell `i` of the
/// image behaves like cell `perm[i]` of the original.
pub trait BlockBijection: Sized {
    fn apply_block_bijection(&self, perm: &[usize]) -> Result<Self>;
}

impl<T: Real> BlockBijection for Graphon<T> {
    fn apply_block_bijection(&self, perm: &[usize]) -> Result<Self> {
        self.permuted(perm)
    }
}

impl<T: Real> BlockBijection for PolicyProfile<T> {
    fn apply_block_bijection(&self, perm: &[usize]) -> Result<Self> {
        self.permuted(perm)
    }
}

impl<T: Real> BlockBijection for DistributionFlow<T> {
    fn apply_block_bijection(&self, perm: &[usize]) -> Result<Self> {
        self.permuted(perm)
    }
}

pub fn apply_block_bijection<O: BlockBijection>(obj: &O, perm: &[usize]) -> Result<O> {
    obj.apply_block_bijection(perm)
}

pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm)?;
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Ok(inv)
}

/// Validates `perm` as a bijection on `0..perm.len()`.
pub fn validate_permutation(perm: &[usize]) -> Result<()> {
    check_permutation(perm)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}
