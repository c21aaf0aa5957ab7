use std::time::Instant;

use gmfg_core::scalar::{count, lit};
use gmfg_core::{
    distance_flow, distance_policy, exploitability, DistributionFlow, GmfgModel, PolicyProfile,
    Real,
};
use serde::{Deserialize, Serialize};

use crate::error::{PpoError, Result};
use crate::oracle::{BoxError, Oracle};
use crate::schedule::Schedules;
use crate::step::{mirror_descent_profile, mix_flow, mix_uniform};

/// True game used only for reporting, with an optional reference equilibrium `(pi*, mu*)`.
#[derive(Debug, Clone, Copy)]
pub struct Metrics<'a, T: Real> {
    pub model: &'a GmfgModel<T>,
    pub reference: Option<(&'a PolicyProfile<T>, &'a DistributionFlow<T>)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub store_iterates: bool,
}

/// Per-iteration record; entry `t - 1` describes iterate `t`. Metrics that
/// were not requested are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory<T> {
    pub exploitability: Vec<T>,
    /// `D(pi_t, pi*)` weighted by `mu*`.
    pub policy_dist: Vec<T>,
    /// `d(bar mu_t, mu*)`.
    pub flow_dist: Vec<T>,
    /// `D` of the running policy average.
    pub avg_policy_dist: Vec<T>,
    /// `d` of the running flow average.
    pub avg_flow_dist: Vec<T>,
    /// Seconds since the start of the run, taken at the end of each iteration.
    pub wall_clock: Vec<f64>,
    pub avg_policy: PolicyProfile<T>,
    pub avg_flow: DistributionFlow<T>,
    pub final_policy: PolicyProfile<T>,
    pub iterates: Option<Vec<PolicyProfile<T>>>,
}

impl<T: Real> RunHistory<T> {
    pub fn len(&self) -> usize {
        self.exploitability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exploitability.is_empty()
    }
}

fn oracle_err(iteration: usize) -> impl FnOnce(BoxError) -> PpoError {
    move |source| PpoError::Oracle { iteration, source }
}

fn checked_flow<T: Real>(
    flow: DistributionFlow<T>,
    iteration: usize,
) -> Result<DistributionFlow<T>> {
    flow.validate().map_err(|e| PpoError::Oracle {
        iteration,
        source: Box::new(e),
    })?;
    Ok(flow)
}

/// Runs `sched.iterations` rounds of mirror-descent policy optimization with
/// fictitious-play flow averaging, starting from the uniform policy.
pub fn run_gmfg_ppo<T: Real, O: Oracle<T>>(
    oracle: &mut O,
    metrics: Option<Metrics<'_, T>>,
    sched: &Schedules,
    seed: u64,
    options: RunOptions,
) -> Result<RunHistory<T>> {
    sched.validate()?;
    let start = Instant::now();
    let (eta, lambda): (T, T) = (lit(sched.eta), lit(sched.lambda));
    oracle.begin(seed).map_err(oracle_err(0))?;
    let (m, h, s, a) = oracle.policy_shape();
    let mut pi = PolicyProfile::uniform(m, h, s, a);
    run_from(oracle, metrics, sched, &mut pi, eta, lambda, start, options)
}

#[allow(clippy::too_many_arguments)]
fn run_from<T: Real, O: Oracle<T>>(
    oracle: &mut O,
    metrics: Option<Metrics<'_, T>>,
    sched: &Schedules,
    pi: &mut PolicyProfile<T>,
    eta: T,
    lambda: T,
    start: Instant,
    options: RunOptions,
) -> Result<RunHistory<T>> {
    let iterations = sched.iterations;
    let mut bar = checked_flow(oracle.estimate_flow(0, pi).map_err(oracle_err(0))?, 0)?;
    let mut avg_policy = pi.clone();
    let mut avg_flow = bar.clone();
    let nan = T::nan();
    let mut hist = RunHistory {
        exploitability: Vec::with_capacity(iterations),
        policy_dist: Vec::with_capacity(iterations),
        flow_dist: Vec::with_capacity(iterations),
        avg_policy_dist: Vec::with_capacity(iterations),
        avg_flow_dist: Vec::with_capacity(iterations),
        wall_clock: Vec::with_capacity(iterations),
        avg_policy: pi.clone(),
        avg_flow: bar.clone(),
        final_policy: pi.clone(),
        iterates: options.store_iterates.then(Vec::new),
    };

    for t in 1..=iterations {
        if t > 1 {
            let w = count::<T>(t).recip();
            avg_policy = avg_policy.mix(pi, w)?;
            avg_flow = avg_flow.mix(&bar, w)?;
        }
        if let Some(iterates) = hist.iterates.as_mut() {
            iterates.push(pi.clone());
        }
        match &metrics {
            Some(m) => {
                hist.exploitability
                    .push(exploitability(pi, m.model, lambda)?);
                match m.reference {
                    Some((pi_star, mu_star)) => {
                        hist.policy_dist
                            .push(distance_policy(pi, pi_star, mu_star)?);
                        hist.flow_dist.push(distance_flow(&bar, mu_star)?);
                        hist.avg_policy_dist
                            .push(distance_policy(&avg_policy, pi_star, mu_star)?);
                        hist.avg_flow_dist.push(distance_flow(&avg_flow, mu_star)?);
                    }
                    None => {
                        for v in [
                            &mut hist.policy_dist,
                            &mut hist.flow_dist,
                            &mut hist.avg_policy_dist,
                            &mut hist.avg_flow_dist,
                        ] {
                            v.push(nan);
                        }
                    }
                }
            }
            None => {
                for v in [
                    &mut hist.exploitability,
                    &mut hist.policy_dist,
                    &mut hist.flow_dist,
                    &mut hist.avg_policy_dist,
                    &mut hist.avg_flow_dist,
                ] {
                    v.push(nan);
                }
            }
        }

        let mu_hat = checked_flow(oracle.estimate_flow(t, pi).map_err(oracle_err(t))?, t)?;
        let q = oracle.estimate_q(t, pi, &bar).map_err(oracle_err(t))?;
        let next_bar = mix_flow(&bar, &mu_hat, lit(sched.alpha(t)))?;
        let improved = mirror_descent_profile(pi, &q, eta, lambda)?;
        *pi = mix_uniform(&improved, lit(sched.beta(t + 1)));
        bar = next_bar;
        hist.wall_clock.push(start.elapsed().as_secs_f64());
    }

    hist.avg_policy = avg_policy;
    hist.avg_flow = avg_flow;
    hist.final_policy = pi.clone();
    Ok(hist)
}
