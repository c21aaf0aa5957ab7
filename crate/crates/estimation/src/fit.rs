//! Joint selection of dynamics, reward and graphon by exhaustive candidate search.

use std::sync::Arc;

use gmfg_core::permute::permutations;
use gmfg_core::{DistributionFlow, Dynamics, GmfgModel, Graphon, StateActionSpace};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::embed::{check_source, step_aggregates, AggregateSource, Embedding};
use crate::error::{EstimationError, Result};
use crate::krr::{fit_groups, Bandwidth, GroupBuilder, KernelKind, KernelRegressor};
use crate::scheme::PositionScheme;

/// Largest `N` accepted by the exhaustive permutation search.
pub const MAX_PERMUTATION_AGENTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Graphon<f64>>,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub kernel: KernelKind,
}

pub const DEFAULT_RIDGE: f64 = 1e-3;

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl CandidateSet {
    pub fn new(candidates: Vec<Graphon<f64>>) -> Self {
        Self {
            candidates,
            ridge: default_ridge(),
            bandwidth: Bandwidth::Median,
            kernel: KernelKind::default(),
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(EstimationError::NoCandidates);
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(EstimationError::Ridge(self.ridge));
        }
        if let Bandwidth::Fixed { sigma } = self.bandwidth {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(EstimationError::Scheme(format!(
                    "kernel bandwidth must be positive, got {sigma}"
                )));
            }
        }
        for g in &self.candidates {
            g.validate()?;
        }
        Ok(())
    }
}

/// Regression target for the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextStateMode {
    /// One indicator head per next state; predictions are projected onto the simplex.
    #[default]
    Indicator,
    /// A single head regressing the numeric state value.
    Scalar,
}

/// How fits and graphon choices are tied across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Each step has its own regressors and its own graphon.
    #[default]
    PerStep,
    /// Each step has its own regressors; one graphon minimizes the summed loss.
    Shared,
    /// Time-homogeneous model: one graphon and one regressor for all steps
    /// with a next state, plus a reward-only fit at the last step.
    Stationary,
}

/// Aggregates used in the embeddings when positions are estimated from peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Pooled when every episode shares one behavior policy.
    #[default]
    Auto,
    Pooled,
    PerEpisode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(default)]
    pub mode: NextStateMode,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub pooling: Pooling,
}

/// Fit at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    pub candidate: usize,
    /// Recovered slot of each agent; `None` for known positions.
    pub perm: Option<Vec<usize>>,
    /// Empirical loss of every candidate (minimized over permutations when
    /// searched) on the steps this fit covers.
    pub losses: Vec<f64>,
    /// Empirical loss of the selected fit on the steps it covers.
    pub loss: f64,
    /// Heads: next-state heads (absent at the last step) followed by the reward head.
    pub regressor: KernelRegressor,
}

/// Estimated dynamics, rewards and graphons, one fit per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedModel {
    pub space: StateActionSpace<f64>,
    pub horizon: usize,
    pub mode: NextStateMode,
    pub scheme: PositionScheme,
    pub candidates: Vec<Graphon<f64>>,
    pub steps: Vec<StepEstimate>,
}

/// Predicted next-state head values (`None` at the last step) and reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub next: Option<Vec<f64>>,
    pub reward: f64,
}

/// Clips negatives and renormalizes; all-zero input maps to uniform.
pub fn project_simplex(v: &mut [f64]) {
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = x.max(0.0);
        total += *x;
    }
    if total > 0.0 && total.is_finite() {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

impl EstimatedModel {
    pub fn graphon(&self, h: usize) -> &Graphon<f64> {
        &self.candidates[self.steps[h].candidate]
    }

    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.candidate).collect()
    }

    /// Candidate chosen at the most steps, lowest index on ties.
    pub fn majority_candidate(&self) -> usize {
        let mut votes = vec![0usize; self.candidates.len()];
        for s in &self.steps {
            votes[s.candidate] += 1;
        }
        let best = *votes.iter().max().unwrap_or(&0);
        votes.iter().position(|&v| v == best).unwrap_or(0)
    }

    pub fn predict(&self, h: usize, x: &Embedding) -> Prediction {
        let mut out = self.steps[h].regressor.predict(x);
        let reward = out.pop().unwrap_or(0.0);
        Prediction {
            next: (h + 1 < self.horizon).then_some(out),
            reward,
        }
    }

    /// Projected transition row at `(h, s, a, z)`; uniform at the last step.
    pub fn transition(&self, h: usize, s: usize, a: usize, z: &[f64]) -> Vec<f64> {
        let ns = self.space.n_states();
        match self.predict(h, &Embedding::new(s, a, z.to_vec())).next {
            Some(mut p) if self.mode == NextStateMode::Indicator => {
                project_simplex(&mut p);
                p
            }
            _ => vec![1.0 / ns as f64; ns],
        }
    }

    pub fn reward(&self, h: usize, s: usize, a: usize, z: &[f64]) -> f64 {
        self.predict(h, &Embedding::new(s, a, z.to_vec())).reward
    }

    /// The estimated game: learned dynamics and rewards with the selected graphon at each step.
    pub fn to_gmfg_model(self: &Arc<Self>, initial: Vec<f64>) -> Result<GmfgModel<f64>> {
        if self.mode != NextStateMode::Indicator {
            return Err(EstimationError::Scheme(
                "a game needs next-state indicator heads".into(),
            ));
        }
        let graphons = (0..self.horizon).map(|h| self.graphon(h).clone()).collect();
        let dynamics = Arc::new(EstimatedDynamics(self.clone()));
        Ok(GmfgModel::new(
            self.space.clone(),
            self.horizon,
            initial,
            dynamics,
            graphons,
        )?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct EstimatedDynamics(Arc<EstimatedModel>);

impl Dynamics<f64> for EstimatedDynamics {
    fn transition(&self, h: usize, s: usize, a: usize, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0.transition(h, s, a, z));
    }

    fn reward(&self, h: usize, s: usize, a: usize, z: &[f64]) -> f64 {
        self.0.reward(h, s, a, z)
    }
}

/// Per-sample regression targets at step `h`.
struct Targets {
    heads: usize,
    /// `[episode][agent]` rows of length `heads`.
    rows: Vec<Vec<Vec<f64>>>,
}

fn targets(data: &Dataset, h: usize, mode: NextStateMode) -> Targets {
    let ns = data.space().n_states();
    let last = h + 1 == data.horizon();
    let next_heads = match (last, mode) {
        (true, _) => 0,
        (false, NextStateMode::Indicator) => ns,
        (false, NextStateMode::Scalar) => 1,
    };
    let heads = next_heads + 1;
    let rows = data
        .episodes()
        .iter()
        .map(|ep| {
            (0..data.n_agents())
                .map(|i| {
                    let t = ep.get(i, h);
                    let mut y = vec![0.0; heads];
                    if let Some(sn) = t.s_next.filter(|_| !last) {
                        match mode {
                            NextStateMode::Indicator => y[sn] = 1.0,
                            NextStateMode::Scalar => y[0] = data.space().state_value(sn),
                        }
                    }
                    y[heads - 1] = t.r;
                    y
                })
                .collect()
        })
        .collect();
    Targets { heads, rows }
}

struct Problem<'a> {
    data: &'a Dataset,
    cands: &'a CandidateSet,
    mode: NextStateMode,
    source: AggregateSource<'a>,
}

impl Problem<'_> {
    /// Fit on the samples of every step in `steps` pooled together.
    fn fit_steps(
        &self,
        steps: &[usize],
        graphon: &Graphon<f64>,
        positions: &[f64],
        all_targets: &[Targets],
    ) -> Result<(KernelRegressor, f64)> {
        let mut b = GroupBuilder::new(all_targets[steps[0]].heads);
        for &h in steps {
            let tg = &all_targets[h];
            let aggs = step_aggregates(graphon, self.data, positions, h, self.source);
            for (tau, ep) in self.data.episodes().iter().enumerate() {
                let row = if aggs.len() == 1 {
                    &aggs[0]
                } else {
                    &aggs[tau]
                };
                for (i, z) in row.iter().enumerate() {
                    let t = ep.get(i, h);
                    b.push(&Embedding::new(t.s, t.a, z.clone()), &tg.rows[tau][i]);
                }
            }
        }
        fit_groups(
            &b.finish(),
            self.cands.ridge,
            self.cands.bandwidth,
            self.cands.kernel,
        )
    }

    /// Exhaustive search over `perms × candidates` (perms in the given order).
    fn solve(&self, selection: Selection, perms: &[Option<Vec<usize>>]) -> Result<EstimatedModel> {
        let data = self.data;
        let hz = data.horizon();
        let nc = self.cands.candidates.len();
        let positions: Vec<Vec<f64>> = perms
            .iter()
            .map(|p| data.scheme().positions_under(p.as_deref()))
            .collect::<Result<_>>()?;
        let all_targets: Vec<Targets> = (0..hz).map(|h| targets(data, h, self.mode)).collect();
        let pieces: Vec<Vec<usize>> = match selection {
            Selection::Stationary if hz > 1 => vec![(0..hz - 1).collect(), vec![hz - 1]],
            _ => (0..hz).map(|h| vec![h]).collect(),
        };

        // losses[piece][p * nc + c]
        let mut losses = vec![vec![0.0; perms.len() * nc]; pieces.len()];
        for (piece, steps) in pieces.iter().enumerate() {
            for (p, pos) in positions.iter().enumerate() {
                for (c, g) in self.cands.candidates.iter().enumerate() {
                    losses[piece][p * nc + c] = self.fit_steps(steps, g, pos, &all_targets)?.1;
                }
            }
        }
        let argmin = |v: &[f64]| {
            let mut best = 0;
            for (k, &x) in v.iter().enumerate() {
                if x < v[best] {
                    best = k;
                }
            }
            best
        };
        let joint = match selection {
            Selection::PerStep => None,
            Selection::Shared | Selection::Stationary => {
                let totals: Vec<f64> = (0..perms.len() * nc)
                    .map(|k| losses.iter().map(|l| l[k]).sum())
                    .collect();
                Some(argmin(&totals))
            }
        };
        let mut steps = Vec::with_capacity(hz);
        for (piece, covered) in pieces.iter().enumerate() {
            let k = joint.unwrap_or_else(|| argmin(&losses[piece]));
            let (p, c) = (k / nc, k % nc);
            let (regressor, loss) = self.fit_steps(
                covered,
                &self.cands.candidates[c],
                &positions[p],
                &all_targets,
            )?;
            let per_candidate: Vec<f64> = (0..nc)
                .map(|c| {
                    (0..perms.len())
                        .map(|p| losses[piece][p * nc + c])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            for _ in covered {
                steps.push(StepEstimate {
                    candidate: c,
                    perm: perms[p].clone(),
                    losses: per_candidate.clone(),
                    loss,
                    regressor: regressor.clone(),
                });
            }
        }
        Ok(EstimatedModel {
            space: data.space().clone(),
            horizon: hz,
            mode: self.mode,
            scheme: data.scheme().clone(),
            candidates: self.cands.candidates.clone(),
            steps,
        })
    }
}

fn resolve_pooling(data: &Dataset, pooling: Pooling) -> AggregateSource<'static> {
    match pooling {
        Pooling::Pooled => AggregateSource::Pooled,
        Pooling::PerEpisode => AggregateSource::Episode,
        Pooling::Auto if data.distinct_policies() <= 1 => AggregateSource::Pooled,
        Pooling::Auto => AggregateSource::Episode,
    }
}

fn check_known(data: &Dataset) -> Result<()> {
    if !data.scheme().is_known() {
        return Err(EstimationError::Scheme(
            "unknown positions need fit_unknown".into(),
        ));
    }
    if data.n_episodes() == 0 {
        return Err(EstimationError::Dataset("no episodes".into()));
    }
    Ok(())
}

/// Estimate from agents at known positions, aggregates taken from peers' states.
pub fn fit(data: &Dataset, cands: &CandidateSet) -> Result<EstimatedModel> {
    fit_with(data, cands, &FitOptions::default())
}

pub fn fit_with(data: &Dataset, cands: &CandidateSet, opts: &FitOptions) -> Result<EstimatedModel> {
    cands.validate()?;
    check_known(data)?;
    let source = resolve_pooling(data, opts.pooling);
    check_source(data, source)?;
    Problem {
        data,
        cands,
        mode: opts.mode,
        source,
    }
    .solve(opts.selection, &[None])
}

/// Estimate with exact aggregates of a known population flow.
pub fn fit_known_flow(
    data: &Dataset,
    flow: &DistributionFlow<f64>,
    cands: &CandidateSet,
) -> Result<EstimatedModel> {
    fit_known_flow_with(data, flow, cands, &FitOptions::default())
}

pub fn fit_known_flow_with(
    data: &Dataset,
    flow: &DistributionFlow<f64>,
    cands: &CandidateSet,
    opts: &FitOptions,
) -> Result<EstimatedModel> {
    cands.validate()?;
    check_known(data)?;
    if flow.horizon() != data.horizon() || flow.states() != data.space().n_states() {
        return Err(EstimationError::Dataset(
            "reference flow does not match the dataset".into(),
        ));
    }
    Problem {
        data,
        cands,
        mode: opts.mode,
        source: AggregateSource::Flow(flow),
    }
    .solve(opts.selection, &[None])
}

/// Estimate with unknown agent-to-slot assignment, searching all `N!` assignments.
pub fn fit_unknown(data: &Dataset, cands: &CandidateSet) -> Result<EstimatedModel> {
    fit_unknown_with(data, cands, &FitOptions::default())
}

pub fn fit_unknown_with(
    data: &Dataset,
    cands: &CandidateSet,
    opts: &FitOptions,
) -> Result<EstimatedModel> {
    cands.validate()?;
    let n = match data.scheme() {
        PositionScheme::UnknownGrid { n } => *n,
        _ => {
            return Err(EstimationError::Scheme(
                "fit_unknown needs unknown grid positions".into(),
            ))
        }
    };
    if n > MAX_PERMUTATION_AGENTS {
        return Err(EstimationError::TooManyAgents {
            n,
            max: MAX_PERMUTATION_AGENTS,
        });
    }
    if data.n_episodes() == 0 {
        return Err(EstimationError::Dataset("no episodes".into()));
    }
    let source = resolve_pooling(data, opts.pooling);
    check_source(data, source)?;
    let perms: Vec<Option<Vec<usize>>> = permutations(n).into_iter().map(Some).collect();
    Problem {
        data,
        cands,
        mode: opts.mode,
        source,
    }
    .solve(opts.selection, &perms)
}
