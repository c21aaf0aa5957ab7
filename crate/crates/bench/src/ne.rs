//! Reference equilibrium by damped best-response iteration on flows.

use gmfg_core::{
    distance_flow, exploitability, gamma2, soft_optimal_policy, DistributionFlow, GmfgModel,
    PolicyProfile,
};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new flow in `mu <- (1 - damping) mu + damping Γ₂(Γ₁(mu))`.
    pub damping: f64,
}

impl Default for NeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            damping: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub policy: PolicyProfile<f64>,
    /// `Γ₂(policy)`.
    pub flow: DistributionFlow<f64>,
    pub iterations: usize,
    pub exploitability: f64,
    /// `d(Γ₂(policy), mu)` for the flow `mu` the policy responds to.
    pub residual: f64,
}

/// Iterates `pi_k = Γ₁(mu_{k-1})`, `nu_k = Γ₂(pi_k)`, `mu_k = (1 - δ) mu_{k-1} + δ nu_k`
/// from the uniform policy's flow until both the exploitability of `pi_k` and
/// `d(nu_k, mu_{k-1})` are at most `tol`.
pub fn find_ne_fixed_point(
    model: &GmfgModel<f64>,
    lambda: f64,
    cells: usize,
    opts: &NeOptions,
) -> Result<Equilibrium> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BenchError::config(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(BenchError::config(
            "damping",
            format!("must lie in (0, 1], got {}", opts.damping),
        ));
    }
    if opts.max_iter == 0 {
        return Err(BenchError::config("max_iter", "must be at least 1"));
    }
    let uniform =
        PolicyProfile::uniform(cells, model.horizon(), model.n_states(), model.n_actions());
    let mut mu = gamma2(&uniform, model)?;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for k in 1..=opts.max_iter {
        let (policy, _) = soft_optimal_policy(&mu, model, lambda)?;
        let flow = gamma2(&policy, model)?;
        let residual = distance_flow(&flow, &mu)?;
        let expl = exploitability(&policy, model, lambda)?;
        if expl <= opts.tol && residual <= opts.tol {
            return Ok(Equilibrium {
                policy,
                flow,
                iterations: k,
                exploitability: expl,
                residual,
            });
        }
        last = (expl, residual);
        mu = mu.mix(&flow, opts.damping)?;
    }
    Err(BenchError::NotConverged(format!(
        "{} iterations, exploitability {:e}, flow residual {:e}, tolerance {:e}",
        opts.max_iter, last.0, last.1, opts.tol
    )))
}
