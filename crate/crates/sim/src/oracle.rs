//! Flow and action-value estimates for the policy-optimization loop, built
//! only from simulator data and a graphon candidate set.

use std::sync::Arc;

use gmfg_core::{evaluate_policy_all, gamma2, DistributionFlow, GmfgModel, PolicyProfile, QTable};
use gmfg_estimation::{
    fit_known_flow_with, fit_unknown_with, fit_with, CandidateSet, Dataset, EstimatedModel,
    FitOptions, PositionScheme,
};
use gmfg_ppo::{mix_flow, mix_uniform, Oracle, OracleResult};
use serde::{Deserialize, Serialize};

use crate::baseline::{empirical_flow_baseline, monte_carlo_q};
use crate::error::{Result, SimError};
use crate::rollout::{rollout, RequestKind, SimRequest};

/// When the model is (re)estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refit {
    /// Estimate once, on the first call, and reuse the models afterwards.
    #[default]
    Once,
    EveryIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Episodes `L` per simulator call.
    pub episodes: usize,
    pub scheme: PositionScheme,
    pub candidates: CandidateSet,
    /// Weight of the current policy in the behavior policy; the rest is uniform.
    #[serde(default)]
    pub behavior_mix: f64,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub refit: Refit,
    pub lambda: f64,
}

impl OracleConfig {
    pub fn new(
        scheme: PositionScheme,
        episodes: usize,
        candidates: CandidateSet,
        lambda: f64,
    ) -> Self {
        Self {
            episodes,
            scheme,
            candidates,
            behavior_mix: 0.0,
            fit: FitOptions::default(),
            refit: Refit::Once,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(SimError::Config("episodes must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.behavior_mix) {
            return Err(SimError::Config(format!(
                "behavior_mix {} outside [0, 1]",
                self.behavior_mix
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SimError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        self.scheme.validate()?;
        self.candidates.validate()?;
        Ok(())
    }

    fn behavior(&self, policy: &PolicyProfile<f64>) -> PolicyProfile<f64> {
        mix_uniform(policy, 1.0 - self.behavior_mix)
    }
}

/// State law at the first step, pooled over all agents and episodes.
pub fn empirical_initial(data: &Dataset) -> Vec<f64> {
    let mut p = vec![0.0; data.space().n_states()];
    let w = 1.0 / (data.n_agents() * data.n_episodes()) as f64;
    for ep in data.episodes() {
        for i in 0..data.n_agents() {
            p[ep.get(i, 0).s] += w;
        }
    }
    p
}

fn fit_dataset(
    data: &Dataset,
    cfg: &OracleConfig,
    flow: Option<&DistributionFlow<f64>>,
) -> Result<EstimatedModel> {
    Ok(match (data.scheme().is_known(), flow) {
        (true, Some(f)) => fit_known_flow_with(data, f, &cfg.candidates, &cfg.fit)?,
        (true, None) => fit_with(data, &cfg.candidates, &cfg.fit)?,
        (false, _) => fit_unknown_with(data, &cfg.candidates, &cfg.fit)?,
    })
}

/// Estimated game from the policy's own rollouts, with the empirical initial law.
pub fn estimate_flow_model(
    policy: &PolicyProfile<f64>,
    cfg: &OracleConfig,
    simulator: &GmfgModel<f64>,
    seed: u64,
) -> Result<(GmfgModel<f64>, Arc<EstimatedModel>)> {
    let req = SimRequest::new(
        RequestKind::SelfInduced,
        policy.clone(),
        cfg.scheme.clone(),
        cfg.episodes,
        seed,
    );
    let data = rollout(&req, simulator)?.dataset;
    let est = Arc::new(fit_dataset(&data, cfg, None)?);
    Ok((est.to_gmfg_model(empirical_initial(&data))?, est))
}

/// Estimated game from behavior-policy rollouts in the game frozen at `bar_flow`.
pub fn estimate_q_model(
    policy: &PolicyProfile<f64>,
    bar_flow: &DistributionFlow<f64>,
    cfg: &OracleConfig,
    simulator: &GmfgModel<f64>,
    seed: u64,
) -> Result<(GmfgModel<f64>, Arc<EstimatedModel>)> {
    let req = SimRequest::new(
        RequestKind::InducedByFlow(bar_flow.clone()),
        cfg.behavior(policy),
        cfg.scheme.clone(),
        cfg.episodes,
        seed,
    )
    .with_policy_id("behavior");
    let data = rollout(&req, simulator)?.dataset;
    let est = Arc::new(fit_dataset(&data, cfg, Some(bar_flow))?);
    Ok((est.to_gmfg_model(empirical_initial(&data))?, est))
}

fn q_tables(
    policy: &PolicyProfile<f64>,
    bar_flow: &DistributionFlow<f64>,
    model: &GmfgModel<f64>,
    lambda: f64,
) -> Result<Vec<QTable<f64>>> {
    Ok(evaluate_policy_all(policy, bar_flow, model, lambda)?
        .into_iter()
        .map(|(q, _)| q)
        .collect())
}

#[derive(Debug, Clone)]
pub struct Algorithm2Step {
    pub flow: DistributionFlow<f64>,
    pub bar_flow: DistributionFlow<f64>,
    pub q: Vec<QTable<f64>>,
    pub flow_model: Arc<EstimatedModel>,
    pub q_model: Arc<EstimatedModel>,
}

/// One full estimation round: fit on the policy's own rollouts and propagate it
/// for `μ̂`, mix into the running flow with weight `alpha`, then fit on behavior
/// rollouts in the game frozen at the old running flow and evaluate the policy there.
pub fn algorithm2_step(
    policy: &PolicyProfile<f64>,
    bar_flow: &DistributionFlow<f64>,
    alpha: f64,
    cfg: &OracleConfig,
    simulator: &GmfgModel<f64>,
    seed: u64,
) -> Result<Algorithm2Step> {
    cfg.validate()?;
    let (flow_game, flow_model) = estimate_flow_model(policy, cfg, simulator, seed)?;
    let flow = gamma2(policy, &flow_game)?;
    let next_bar = mix_flow(bar_flow, &flow, alpha).map_err(|e| SimError::Config(e.to_string()))?;
    let (q_game, q_model) = estimate_q_model(
        policy,
        bar_flow,
        cfg,
        simulator,
        seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    let q = q_tables(policy, bar_flow, &q_game, cfg.lambda)?;
    Ok(Algorithm2Step {
        flow,
        bar_flow: next_bar,
        q,
        flow_model,
        q_model,
    })
}

/// Seed of simulator call `call` (0 for flows, 1 for action values) at iteration `t`.
fn call_seed(root: u64, t: usize, call: u64) -> u64 {
    root.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ ((t as u64) << 1 | call)
}

/// Simulator-backed oracle: every estimate comes from fitted models.
pub struct EstimationOracle {
    simulator: GmfgModel<f64>,
    cfg: OracleConfig,
    cells: usize,
    seed: u64,
    flow_game: Option<GmfgModel<f64>>,
    q_game: Option<GmfgModel<f64>>,
    /// Every model fitted so far, in call order.
    pub fitted: Vec<Arc<EstimatedModel>>,
}

impl EstimationOracle {
    pub fn new(simulator: GmfgModel<f64>, cfg: OracleConfig, cells: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            simulator,
            cfg,
            cells,
            seed: 0,
            flow_game: None,
            q_game: None,
            fitted: Vec::new(),
        })
    }
}

impl Oracle<f64> for EstimationOracle {
    fn policy_shape(&self) -> (usize, usize, usize, usize) {
        let m = &self.simulator;
        (self.cells, m.horizon(), m.n_states(), m.n_actions())
    }

    fn begin(&mut self, seed: u64) -> OracleResult<()> {
        self.seed = seed;
        self.flow_game = None;
        self.q_game = None;
        self.fitted.clear();
        Ok(())
    }

    fn estimate_flow(
        &mut self,
        t: usize,
        policy: &PolicyProfile<f64>,
    ) -> OracleResult<DistributionFlow<f64>> {
        if self.flow_game.is_none() || self.cfg.refit == Refit::EveryIteration {
            let (game, est) = estimate_flow_model(
                policy,
                &self.cfg,
                &self.simulator,
                call_seed(self.seed, t, 0),
            )?;
            self.flow_game = Some(game);
            self.fitted.push(est);
        }
        Ok(gamma2(
            policy,
            self.flow_game.as_ref().expect("fitted above"),
        )?)
    }

    fn estimate_q(
        &mut self,
        t: usize,
        policy: &PolicyProfile<f64>,
        bar_flow: &DistributionFlow<f64>,
    ) -> OracleResult<Vec<QTable<f64>>> {
        if self.q_game.is_none() || self.cfg.refit == Refit::EveryIteration {
            let seed = call_seed(self.seed, t, 1);
            let (game, est) = estimate_q_model(policy, bar_flow, &self.cfg, &self.simulator, seed)?;
            self.q_game = Some(game);
            self.fitted.push(est);
        }
        Ok(q_tables(
            policy,
            bar_flow,
            self.q_game.as_ref().expect("fitted above"),
            self.cfg.lambda,
        )?)
    }
}

/// Model-free oracle: histogram flows and Monte Carlo action values from the
/// policy's own rollouts.
pub struct EmpiricalOracle {
    simulator: GmfgModel<f64>,
    scheme: PositionScheme,
    episodes: usize,
    lambda: f64,
    cells: usize,
    seed: u64,
    last: Option<(usize, Dataset)>,
}

impl EmpiricalOracle {
    pub fn new(
        simulator: GmfgModel<f64>,
        agents: usize,
        episodes: usize,
        lambda: f64,
        cells: usize,
    ) -> Result<Self> {
        let scheme = PositionScheme::KnownGrid { n: agents };
        scheme.validate()?;
        if episodes == 0 {
            return Err(SimError::Config("episodes must be at least 1".into()));
        }
        Ok(Self {
            simulator,
            scheme,
            episodes,
            lambda,
            cells,
            seed: 0,
            last: None,
        })
    }

    fn data(&mut self, t: usize, policy: &PolicyProfile<f64>) -> Result<&Dataset> {
        if self.last.as_ref().is_none_or(|(s, _)| *s != t) {
            let req = SimRequest::new(
                RequestKind::SelfInduced,
                policy.clone(),
                self.scheme.clone(),
                self.episodes,
                call_seed(self.seed, t, 0),
            );
            self.last = Some((t, rollout(&req, &self.simulator)?.dataset));
        }
        Ok(&self.last.as_ref().expect("set above").1)
    }
}

impl Oracle<f64> for EmpiricalOracle {
    fn policy_shape(&self) -> (usize, usize, usize, usize) {
        let m = &self.simulator;
        (self.cells, m.horizon(), m.n_states(), m.n_actions())
    }

    fn begin(&mut self, seed: u64) -> OracleResult<()> {
        self.seed = seed;
        self.last = None;
        Ok(())
    }

    fn estimate_flow(
        &mut self,
        t: usize,
        policy: &PolicyProfile<f64>,
    ) -> OracleResult<DistributionFlow<f64>> {
        let cells = self.cells;
        Ok(empirical_flow_baseline(self.data(t, policy)?, cells)?)
    }

    fn estimate_q(
        &mut self,
        t: usize,
        policy: &PolicyProfile<f64>,
        _bar_flow: &DistributionFlow<f64>,
    ) -> OracleResult<Vec<QTable<f64>>> {
        let lambda = self.lambda;
        Ok(monte_carlo_q(self.data(t, policy)?, policy, lambda)?)
    }
}
