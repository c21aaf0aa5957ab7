//! Mean-embedding features `onehot(s, a) ⊗ z` with empirical or exact aggregates.
//!
//! The inner kernel is a product of indicators, so the embedding of
//! `δ_s × δ_a × z` is the `|S||A||S|` vector whose `(s, a)` block is `z` and
//! whose other blocks vanish. It is stored compactly as `(s, a, z)`.

use gmfg_core::{aggregate_at, Aggregate, DistributionFlow, Graphon};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{EstimationError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub s: usize,
    pub a: usize,
    pub z: Vec<f64>,
}

impl Embedding {
    pub fn new(s: usize, a: usize, z: Vec<f64>) -> Self {
        Self { s, a, z }
    }

    /// Dense `|S||A||S|` vector with block `(s, a)` at offset `(s |A| + a) |S|`.
    pub fn to_dense(&self, n_actions: usize) -> Vec<f64> {
        let ns = self.z.len();
        let mut v = vec![0.0; ns * n_actions * ns];
        let o = (self.s * n_actions + self.a) * ns;
        v[o..o + ns].copy_from_slice(&self.z);
        v
    }

    /// Squared Euclidean distance between the dense vectors.
    pub fn sq_dist(&self, other: &Self) -> f64 {
        if self.s == other.s && self.a == other.a {
            self.z
                .iter()
                .zip(&other.z)
                .map(|(x, y)| (x - y) * (x - y))
                .sum()
        } else {
            self.z.iter().chain(&other.z).map(|x| x * x).sum()
        }
    }

    pub fn block_mass(&self) -> f64 {
        self.z.iter().sum()
    }
}

/// `ẑ = (1/(N-1)) Σ_{j≠i} W(ξ_i, ξ_j) δ_{s_j}` from the states of all agents at one step.
pub fn empirical_aggregate(
    graphon: &Graphon<f64>,
    positions: &[f64],
    states: &[usize],
    n_states: usize,
    i: usize,
) -> Result<Aggregate<f64>> {
    let n = positions.len();
    if n < 2 {
        return Err(EstimationError::TooFewAgents(n));
    }
    if states.len() != n || i >= n {
        return Err(EstimationError::Dataset(format!(
            "{} states for {n} agents, agent {i}",
            states.len()
        )));
    }
    let w = 1.0 / (n - 1) as f64;
    let mut z = vec![0.0; n_states];
    for j in (0..n).filter(|&j| j != i) {
        z[states[j]] += w * graphon.eval(positions[i], positions[j]);
    }
    Ok(Aggregate(z))
}

/// Where the aggregate of an embedding comes from.
#[derive(Debug, Clone, Copy)]
pub enum AggregateSource<'a> {
    /// Peers' realized states in the same episode.
    Episode,
    /// Peers' states averaged over all episodes at the same step.
    Pooled,
    /// Exact quadrature against a known flow; agents sit in the flow's grid.
    Flow(&'a DistributionFlow<f64>),
}

/// Per-agent state histograms at step `h`, averaged over episodes: `hist[j][s]`.
pub(crate) fn state_histograms(data: &Dataset, h: usize) -> Vec<Vec<f64>> {
    let (n, ns) = (data.n_agents(), data.space().n_states());
    let w = 1.0 / data.n_episodes() as f64;
    let mut hist = vec![vec![0.0; ns]; n];
    for ep in data.episodes() {
        for (j, row) in hist.iter_mut().enumerate() {
            row[ep.get(j, h).s] += w;
        }
    }
    hist
}

fn weight_matrix(graphon: &Graphon<f64>, positions: &[f64]) -> Vec<Vec<f64>> {
    let n = positions.len();
    let w = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        w * graphon.eval(positions[i], positions[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// Aggregates used at step `h`, indexed `[episode][agent]` (a single row unless
/// the source is [`AggregateSource::Episode`]).
pub(crate) fn step_aggregates(
    graphon: &Graphon<f64>,
    data: &Dataset,
    positions: &[f64],
    h: usize,
    source: AggregateSource<'_>,
) -> Vec<Vec<Vec<f64>>> {
    let ns = data.space().n_states();
    match source {
        AggregateSource::Flow(flow) => {
            vec![positions
                .iter()
                .map(|&x| aggregate_at(graphon, flow, x, h).0)
                .collect()]
        }
        AggregateSource::Pooled => {
            let hist = state_histograms(data, h);
            let wm = weight_matrix(graphon, positions);
            let row = wm
                .iter()
                .map(|wi| {
                    let mut z = vec![0.0; ns];
                    for (k, hj) in wi.iter().zip(&hist) {
                        for (zs, &p) in z.iter_mut().zip(hj) {
                            *zs += k * p;
                        }
                    }
                    z
                })
                .collect();
            vec![row]
        }
        AggregateSource::Episode => {
            let wm = weight_matrix(graphon, positions);
            data.episodes()
                .iter()
                .map(|ep| {
                    wm.iter()
                        .map(|wi| {
                            let mut z = vec![0.0; ns];
                            for (j, &k) in wi.iter().enumerate() {
                                z[ep.get(j, h).s] += k;
                            }
                            z
                        })
                        .collect()
                })
                .collect()
        }
    }
}

pub(crate) fn check_source(data: &Dataset, source: AggregateSource<'_>) -> Result<()> {
    if matches!(source, AggregateSource::Pooled) && data.distinct_policies() > 1 {
        return Err(EstimationError::HeterogeneousPolicies(
            data.distinct_policies(),
        ));
    }
    Ok(())
}

/// Embedding of agent `i`'s record at `(tau, h)`. `perm` places agent `i` in
/// grid slot `perm[i]` and is only meaningful for unknown grid positions.
pub fn embed(
    graphon: &Graphon<f64>,
    data: &Dataset,
    i: usize,
    tau: usize,
    h: usize,
    source: AggregateSource<'_>,
    perm: Option<&[usize]>,
) -> Result<Embedding> {
    check_source(data, source)?;
    if i >= data.n_agents() || tau >= data.n_episodes() || h >= data.horizon() {
        return Err(EstimationError::Dataset(format!(
            "no record for agent {i}, episode {tau}, step {h}"
        )));
    }
    let positions = data.scheme().positions_under(perm)?;
    let aggs = step_aggregates(graphon, data, &positions, h, source);
    let row = if aggs.len() == 1 {
        &aggs[0]
    } else {
        &aggs[tau]
    };
    let t = data.episodes()[tau].get(i, h);
    Ok(Embedding::new(t.s, t.a, row[i].clone()))
}
