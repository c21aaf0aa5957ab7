use gmfg_core::{
    aggregate_at, gamma2, gamma3, AgentGrid, DistributionFlow, GmfgModel, PolicyProfile,
};
use gmfg_estimation::{grid_position, Dataset, Episode, PositionScheme, Transition};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SimError};

/// Which flow shapes the game the sampled agents play.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestKind {
    /// Aggregates come from the flow the policy itself induces.
    SelfInduced,
    /// Aggregates come from a prescribed flow.
    InducedByFlow(DistributionFlow<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRequest {
    pub kind: RequestKind,
    pub policy: PolicyProfile<f64>,
    /// Label recorded with every episode.
    pub policy_id: String,
    pub scheme: PositionScheme,
    pub episodes: usize,
    pub seed: u64,
    /// Random stream of each agent; agent `i` uses stream `i` when absent.
    pub streams: Option<Vec<u64>>,
}

impl SimRequest {
    pub fn new(
        kind: RequestKind,
        policy: PolicyProfile<f64>,
        scheme: PositionScheme,
        episodes: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            policy,
            policy_id: "pi".into(),
            scheme,
            episodes,
            seed,
            streams: None,
        }
    }

    pub fn with_policy_id(mut self, id: impl Into<String>) -> Self {
        self.policy_id = id.into();
        self
    }

    pub fn validate(&self, model: &GmfgModel<f64>) -> Result<()> {
        self.scheme.validate()?;
        if self.episodes == 0 {
            return Err(SimError::Config("need at least one episode".into()));
        }
        let p = &self.policy;
        if p.horizon() != model.horizon()
            || p.states() != model.n_states()
            || p.actions() != model.n_actions()
        {
            return Err(SimError::Config("policy does not match the model".into()));
        }
        if let RequestKind::InducedByFlow(f) = &self.kind {
            if f.cells() != p.cells()
                || f.horizon() != model.horizon()
                || f.states() != model.n_states()
            {
                return Err(SimError::Config(
                    "prescribed flow does not match the policy".into(),
                ));
            }
        }
        if let Some(s) = &self.streams {
            if s.len() != self.scheme.n() {
                return Err(SimError::Config(format!(
                    "{} streams for {} agents",
                    s.len(),
                    self.scheme.n()
                )));
            }
        }
        Ok(())
    }
}

/// Simulated data with the ground truth behind it.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub dataset: Dataset,
    /// State laws of the population (`Γ₂(π)` or `Γ₃(π, μ)`).
    pub flow: DistributionFlow<f64>,
    /// Grid slot of every agent; identity unless positions are unknown.
    pub slots: Vec<usize>,
    /// Actual position of every agent.
    pub positions: Vec<f64>,
}

/// Independent stream for `(agent stream, episode)` under one root seed.
pub fn agent_rng(seed: u64, stream: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // 2^40 words per episode is far more than any trajectory consumes.
    rng.set_word_pos((episode as u128) << 40);
    rng
}

pub(crate) fn sample(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(dist.len() - 1)
}

/// One agent's trajectory with aggregates `aggs[h]` and its cell's policy.
pub fn simulate_agent<R: Rng>(
    model: &GmfgModel<f64>,
    policy: &PolicyProfile<f64>,
    cell: usize,
    aggs: &[Vec<f64>],
    rng: &mut R,
) -> Vec<Transition> {
    let hz = model.horizon();
    let mut out = Vec::with_capacity(hz);
    let mut s = sample(model.initial(), rng.gen());
    for (h, z) in aggs.iter().enumerate().take(hz) {
        let a = sample(policy.row(cell, h, s), rng.gen());
        let r = model.reward(h, s, a, z);
        let s_next = (h + 1 < hz).then(|| sample(&model.transition(h, s, a, z), rng.gen()));
        out.push(Transition { s, a, r, s_next });
        if let Some(n) = s_next {
            s = n;
        }
    }
    out
}

/// Simulates `N` sampled agents for `L` episodes. Each agent reads its
/// aggregates from the population flow, never from its peers' realized states.
pub fn rollout(req: &SimRequest, model: &GmfgModel<f64>) -> Result<Rollout> {
    req.validate(model)?;
    let n = req.scheme.n();
    let (agg_flow, flow) = match &req.kind {
        RequestKind::SelfInduced => {
            let f = gamma2(&req.policy, model)?;
            (f.clone(), f)
        }
        RequestKind::InducedByFlow(mu) => (mu.clone(), gamma3(&req.policy, mu, model)?),
    };
    let slots: Vec<usize> = match &req.scheme {
        PositionScheme::UnknownGrid { .. } => {
            let mut s: Vec<usize> = (0..n).collect();
            s.shuffle(&mut agent_rng(req.seed, u64::MAX, 0));
            s
        }
        _ => (0..n).collect(),
    };
    let positions: Vec<f64> = match &req.scheme {
        PositionScheme::KnownRandom { positions } => positions.clone(),
        _ => slots.iter().map(|&k| grid_position(k, n)).collect(),
    };
    let grid = AgentGrid::new(req.policy.cells());
    let agents: Vec<(usize, Vec<Vec<f64>>)> = positions
        .iter()
        .map(|&x| {
            let aggs = (0..model.horizon())
                .map(|h| aggregate_at(model.graphon(h), &agg_flow, x, h).0)
                .collect();
            (grid.cell_of(x), aggs)
        })
        .collect();
    let streams: Vec<u64> = req
        .streams
        .clone()
        .unwrap_or_else(|| (0..n as u64).collect());
    let episodes: Vec<Episode> = (0..req.episodes)
        .into_par_iter()
        .map(|tau| {
            let mut records = Vec::with_capacity(n * model.horizon());
            for ((cell, aggs), &stream) in agents.iter().zip(&streams) {
                let mut rng = agent_rng(req.seed, stream, tau);
                records.extend(simulate_agent(model, &req.policy, *cell, aggs, &mut rng));
            }
            Episode::new(req.policy_id.clone(), n, model.horizon(), records)
        })
        .collect::<std::result::Result<_, _>>()?;
    let space = model.space().clone();
    let dataset = Dataset::new(space, model.horizon(), req.scheme.clone(), episodes)?;
    Ok(Rollout {
        dataset,
        flow,
        slots,
        positions,
    })
}

/// Concatenates datasets collected under the same scheme and horizon.
pub fn merge_datasets(parts: Vec<Dataset>) -> Result<Dataset> {
    let first = parts
        .first()
        .ok_or_else(|| SimError::Config("nothing to merge".into()))?;
    let (space, horizon, scheme) = (
        first.space().clone(),
        first.horizon(),
        first.scheme().clone(),
    );
    let mut episodes = Vec::new();
    for d in parts {
        if d.horizon() != horizon || d.scheme() != &scheme || d.space() != &space {
            return Err(SimError::Config("datasets differ in shape".into()));
        }
        episodes.extend(d.episodes().iter().cloned());
    }
    Ok(Dataset::new(space, horizon, scheme, episodes)?)
}
