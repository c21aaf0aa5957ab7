//! Grid-averaged L1 distances between policies and between flows, summed over steps.

use crate::error::{GmfgError, Result};
use crate::flow::DistributionFlow;
use crate::policy::PolicyProfile;
use crate::scalar::{count, Real};

fn l1<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}

/// `D(pi, pi~) = (1/M) sum_i sum_h E_{s ~ ref_h^i} || pi_h^i(.|s) - pi~_h^i(.|s) ||_1`.
pub fn distance_policy<T: Real>(
    pi: &PolicyProfile<T>,
    other: &PolicyProfile<T>,
    ref_flow: &DistributionFlow<T>,
) -> Result<T> {
    pi.ensure_same_shape(other)?;
    if ref_flow.cells() != pi.cells()
        || ref_flow.horizon() != pi.horizon()
        || ref_flow.states() != pi.states()
    {
        return Err(GmfgError::ShapeMismatch(
            "reference flow does not match policies".into(),
        ));
    }
    let mut total = T::zero();
    for i in 0..pi.cells() {
        for h in 0..pi.horizon() {
            for (s, &w) in ref_flow.dist(i, h).iter().enumerate() {
                total += w * l1(pi.row(i, h, s), other.row(i, h, s));
            }
        }
    }
    Ok(total / count(pi.cells()))
}

/// `d(mu, mu~) = (1/M) sum_i sum_h || mu_h^i - mu~_h^i ||_1`.
pub fn distance_flow<T: Real>(mu: &DistributionFlow<T>, other: &DistributionFlow<T>) -> Result<T> {
    mu.ensure_same_shape(other)?;
    let total: T = l1(mu.as_slice(), other.as_slice());
    Ok(total / count(mu.cells()))
}
