//! Exploitability: average gain of a soft best response against the policy's own flow.

use crate::dp::{check_lambda_pos, evaluate_cell, soft_optimal_cell};
use crate::error::Result;
use crate::model::GmfgModel;
use crate::policy::PolicyProfile;
use crate::propagate::{aggregate_table, check_policy_shape, gamma2};
use crate::scalar::{count, Real};

/// Per-cell `J(pi*) - J(pi)` on `mu^pi = gamma2(pi)`, with `J = E_{mu_1} V_1`.
pub fn exploitability_per_cell<T: Real>(
    policy: &PolicyProfile<T>,
    model: &GmfgModel<T>,
    lambda: T,
) -> Result<Vec<T>> {
    check_lambda_pos(lambda)?;
    check_policy_shape(policy, model)?;
    let flow = gamma2(policy, model)?;
    let aggs = aggregate_table(model, &flow);
    let mut best = policy.clone();
    let mu1 = model.initial();
    aggs.iter()
        .enumerate()
        .map(|(i, agg)| {
            let (_, v_pi) = evaluate_cell(policy, i, agg, model, lambda, false)?;
            let (_, v_star) = soft_optimal_cell(agg, model, lambda, &mut best, i);
            Ok(v_star.expect(0, mu1) - v_pi.expect(0, mu1))
        })
        .collect()
}

/// Grid average of [`exploitability_per_cell`].
pub fn exploitability<T: Real>(
    policy: &PolicyProfile<T>,
    model: &GmfgModel<T>,
    lambda: T,
) -> Result<T> {
    let gaps = exploitability_per_cell(policy, model, lambda)?;
    Ok(gaps.iter().copied().sum::<T>() / count(gaps.len()))
}
