use gmfg_core::scalar::count;
use gmfg_core::{DistributionFlow, PolicyProfile, QTable, Real};

use crate::error::{PpoError, Result};

/// Closed-form KL-proximal update
/// `p ∝ pi^{1/(1+lambda eta)} exp(eta Q / (1+lambda eta))`, computed in log space.
pub fn mirror_descent_step<T: Real>(pi: &[T], q: &[T], eta: T, lambda: T) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); pi.len()];
    mirror_descent_into(pi, q, eta, lambda, &mut out)?;
    Ok(out)
}

pub(crate) fn mirror_descent_into<T: Real>(
    pi: &[T],
    q: &[T],
    eta: T,
    lambda: T,
    out: &mut [T],
) -> Result<()> {
    let denom = T::one() + lambda * eta;
    for (a, (o, (&p, &qa))) in out.iter_mut().zip(pi.iter().zip(q)).enumerate() {
        if !(p > T::zero()) {
            return Err(PpoError::ZeroProbability { action: a });
        }
        *o = (p.ln() + eta * qa) / denom;
    }
    let max = out.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// `(1 - beta) pi + beta Unif(A)` at every cell, step and state.
pub fn mix_uniform<T: Real>(pi: &PolicyProfile<T>, beta: T) -> PolicyProfile<T> {
    let mut out = pi.clone();
    let u = beta / count::<T>(pi.actions());
    let keep = T::one() - beta;
    for i in 0..pi.cells() {
        for h in 0..pi.horizon() {
            for s in 0..pi.states() {
                for p in out.row_mut(i, h, s) {
                    *p = keep * *p + u;
                }
            }
        }
    }
    out
}

/// Fictitious-play mixing `(1 - alpha) bar + alpha new`.
pub fn mix_flow<T: Real>(
    bar: &DistributionFlow<T>,
    new: &DistributionFlow<T>,
    alpha: T,
) -> gmfg_core::Result<DistributionFlow<T>> {
    if alpha == T::one() {
        new.ensure_same_shape(bar)?;
        return Ok(new.clone());
    }
    bar.mix(new, alpha)
}

/// Mirror step applied at every `(cell, h, s)` with per-cell action values.
pub fn mirror_descent_profile<T: Real>(
    pi: &PolicyProfile<T>,
    q: &[QTable<T>],
    eta: T,
    lambda: T,
) -> Result<PolicyProfile<T>> {
    if q.len() != pi.cells() {
        return Err(gmfg_core::GmfgError::ShapeMismatch(format!(
            "{} action-value tables for {} cells",
            q.len(),
            pi.cells()
        ))
        .into());
    }
    let mut out = pi.clone();
    for (i, qi) in q.iter().enumerate() {
        if qi.horizon() != pi.horizon()
            || qi.states() != pi.states()
            || qi.actions() != pi.actions()
        {
            return Err(gmfg_core::GmfgError::ShapeMismatch(format!(
                "action-value table of cell {i}"
            ))
            .into());
        }
        for h in 0..pi.horizon() {
            for s in 0..pi.states() {
                mirror_descent_into(
                    pi.row(i, h, s),
                    qi.row(h, s),
                    eta,
                    lambda,
                    out.row_mut(i, h, s),
                )?;
            }
        }
    }
    Ok(out)
}

/// Objective maximized by [`mirror_descent_step`]:
/// `eta (<Q, p> - lambda <p, log p>) - KL(p || pi)`.
pub fn proximal_objective<T: Real>(p: &[T], pi: &[T], q: &[T], eta: T, lambda: T) -> T {
    let mut linear = T::zero();
    let mut neg_entropy = T::zero();
    let mut kl = T::zero();
    for ((&pa, &qa), &pia) in p.iter().zip(q).zip(pi) {
        linear += pa * qa;
        if pa > T::zero() {
            neg_entropy += pa * pa.ln();
            kl += pa * (pa.ln() - pia.ln());
        }
    }
    eta * (linear - lambda * neg_entropy) - kl
}
