//! Aggregates and forward propagation of distribution flows.

use crate::error::{GmfgError, Result};
use crate::flow::DistributionFlow;
use crate::graphon::Graphon;
use crate::grid::AgentGrid;
use crate::model::{Aggregate, GmfgModel};
use crate::policy::PolicyProfile;
use crate::scalar::{count, Real};

/// Riemann sum `z = (1/M) sum_j W(x, alpha_j) mu_h^j` for an agent at position `x`.
pub fn aggregate_at<T: Real>(
    graphon: &Graphon<T>,
    flow: &DistributionFlow<T>,
    x: T,
    h: usize,
) -> Aggregate<T> {
    let grid = AgentGrid::new(flow.cells());
    let w = count::<T>(flow.cells()).recip();
    let mut z = vec![T::zero(); flow.states()];
    for j in 0..flow.cells() {
        let k = graphon.eval(x, grid.position(j)) * w;
        if k == T::zero() {
            continue;
        }
        for (zs, &p) in z.iter_mut().zip(flow.dist(j, h)) {
            *zs += k * p;
        }
    }
    Aggregate(z)
}

/// Aggregate seen by grid cell `cell` at step `h`.
pub fn compute_aggregate<T: Real>(
    graphon: &Graphon<T>,
    flow: &DistributionFlow<T>,
    cell: usize,
    h: usize,
) -> Result<Aggregate<T>> {
    if h >= flow.horizon() {
        return Err(GmfgError::IndexOutOfRange {
            what: "step",
            index: h,
            len: flow.horizon(),
        });
    }
    if cell >= flow.cells() {
        return Err(GmfgError::IndexOutOfRange {
            what: "cell",
            index: cell,
            len: flow.cells(),
        });
    }
    let grid = AgentGrid::new(flow.cells());
    Ok(aggregate_at(graphon, flow, grid.position(cell), h))
}

/// Precomputed `W_h(alpha_i, alpha_j) / M` on the grid, shared across steps with equal graphons.
pub(crate) struct GridKernel<T> {
    cells: usize,
    per_step: Vec<std::sync::Arc<Vec<T>>>,
}

impl<T: Real> GridKernel<T> {
    pub(crate) fn new(model: &GmfgModel<T>, cells: usize) -> Self {
        let grid = AgentGrid::new(cells);
        let pos: Vec<T> = grid.positions();
        let w = count::<T>(cells).recip();
        let mut per_step: Vec<std::sync::Arc<Vec<T>>> = Vec::with_capacity(model.horizon());
        for h in 0..model.horizon() {
            let g = model.graphon(h);
            if h > 0 && model.graphon(h - 1) == g {
                per_step.push(per_step[h - 1].clone());
                continue;
            }
            let mut k = Vec::with_capacity(cells * cells);
            for &x in &pos {
                for &y in &pos {
                    k.push(g.eval(x, y) * w);
                }
            }
            per_step.push(std::sync::Arc::new(k));
        }
        Self { cells, per_step }
    }

    pub(crate) fn aggregate(
        &self,
        flow: &DistributionFlow<T>,
        cell: usize,
        h: usize,
        out: &mut [T],
    ) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let row = &self.per_step[h][cell * self.cells..(cell + 1) * self.cells];
        for (j, &k) in row.iter().enumerate() {
            if k == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(flow.dist(j, h)) {
                *o += k * p;
            }
        }
    }

    /// All aggregates of `flow`, indexed `[cell][h]`.
    pub(crate) fn table(&self, flow: &DistributionFlow<T>) -> Vec<Vec<Vec<T>>> {
        (0..flow.cells())
            .map(|i| {
                (0..flow.horizon())
                    .map(|h| {
                        let mut z = vec![T::zero(); flow.states()];
                        self.aggregate(flow, i, h, &mut z);
                        z
                    })
                    .collect()
            })
            .collect()
    }
}

/// Aggregates of `flow` under `model`'s graphons, indexed `[cell][h][state]`.
pub fn aggregate_table<T: Real>(
    model: &GmfgModel<T>,
    flow: &DistributionFlow<T>,
) -> Vec<Vec<Vec<T>>> {
    GridKernel::new(model, flow.cells()).table(flow)
}

pub(crate) fn check_policy_shape<T: Real>(
    policy: &PolicyProfile<T>,
    model: &GmfgModel<T>,
) -> Result<()> {
    if policy.horizon() != model.horizon()
        || policy.states() != model.n_states()
        || policy.actions() != model.n_actions()
    {
        return Err(GmfgError::ShapeMismatch(format!(
            "policy (H={}, S={}, A={}) vs model (H={}, S={}, A={})",
            policy.horizon(),
            policy.states(),
            policy.actions(),
            model.horizon(),
            model.n_states(),
            model.n_actions()
        )));
    }
    Ok(())
}

pub(crate) fn check_flow_shape<T: Real>(
    flow: &DistributionFlow<T>,
    policy: &PolicyProfile<T>,
    model: &GmfgModel<T>,
) -> Result<()> {
    if flow.cells() != policy.cells()
        || flow.horizon() != model.horizon()
        || flow.states() != model.n_states()
    {
        return Err(GmfgError::ShapeMismatch(format!(
            "flow (M={}, H={}, S={}) vs policy M={} and model (H={}, S={})",
            flow.cells(),
            flow.horizon(),
            flow.states(),
            policy.cells(),
            model.horizon(),
            model.n_states()
        )));
    }
    Ok(())
}

/// One step of `mu' (s') = sum_{s,a} mu(s) pi(a|s) P(s'|s,a,z)`.
fn push_forward<T: Real>(
    model: &GmfgModel<T>,
    h: usize,
    mu: &[T],
    policy: &PolicyProfile<T>,
    cell: usize,
    z: &[T],
    scratch: &mut [T],
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    let dynamics = model.dynamics();
    for (s, &ms) in mu.iter().enumerate() {
        if ms == T::zero() {
            continue;
        }
        for (a, &pa) in policy.row(cell, h, s).iter().enumerate() {
            let w = ms * pa;
            if w == T::zero() {
                continue;
            }
            dynamics.transition(h, s, a, z, scratch);
            for (o, &p) in out.iter_mut().zip(scratch.iter()) {
                *o += w * p;
            }
        }
    }
}

/// Flow induced by `policy`: aggregates recomputed from the evolving flow itself.
pub fn gamma2<T: Real>(
    policy: &PolicyProfile<T>,
    model: &GmfgModel<T>,
) -> Result<DistributionFlow<T>> {
    check_policy_shape(policy, model)?;
    let m = policy.cells();
    let ns = model.n_states();
    let kernel = GridKernel::new(model, m);
    let mut flow = DistributionFlow::replicate(model.initial(), m, model.horizon());
    let mut z = vec![T::zero(); ns];
    let mut scratch = vec![T::zero(); ns];
    let mut next = vec![T::zero(); ns];
    for h in 0..model.horizon() - 1 {
        for i in 0..m {
            kernel.aggregate(&flow, i, h, &mut z);
            let mu = flow.dist(i, h).to_vec();
            push_forward(model, h, &mu, policy, i, &z, &mut scratch, &mut next);
            flow.dist_mut(i, h + 1).copy_from_slice(&next);
        }
    }
    Ok(flow)
}

/// Flow of `policy` in the game whose aggregates are frozen to those of `ref_flow`.
pub fn gamma3<T: Real>(
    policy: &PolicyProfile<T>,
    ref_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
) -> Result<DistributionFlow<T>> {
    check_policy_shape(policy, model)?;
    check_flow_shape(ref_flow, policy, model)?;
    let m = policy.cells();
    let ns = model.n_states();
    let kernel = GridKernel::new(model, m);
    let mut flow = DistributionFlow::replicate(model.initial(), m, model.horizon());
    let mut z = vec![T::zero(); ns];
    let mut scratch = vec![T::zero(); ns];
    let mut next = vec![T::zero(); ns];
    for h in 0..model.horizon() - 1 {
        for i in 0..m {
            kernel.aggregate(ref_flow, i, h, &mut z);
            let mu = flow.dist(i, h).to_vec();
            push_forward(model, h, &mu, policy, i, &z, &mut scratch, &mut next);
            flow.dist_mut(i, h + 1).copy_from_slice(&next);
        }
    }
    Ok(flow)
}

/// State law over time of a single agent at position `x` that plays the policy
/// of the cell containing `x` while its aggregates are read from `pop_flow`.
///
/// Returns `(laws[h][s], aggregates[h][s])`.
pub fn agent_marginal<T: Real>(
    x: T,
    policy: &PolicyProfile<T>,
    pop_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    check_policy_shape(policy, model)?;
    check_flow_shape(pop_flow, policy, model)?;
    let cell = AgentGrid::new(policy.cells()).cell_of(x);
    let ns = model.n_states();
    let mut scratch = vec![T::zero(); ns];
    let mut laws = Vec::with_capacity(model.horizon());
    let mut aggs = Vec::with_capacity(model.horizon());
    laws.push(model.initial().to_vec());
    for h in 0..model.horizon() {
        let z = aggregate_at(model.graphon(h), pop_flow, x, h).0;
        if h + 1 < model.horizon() {
            let mut next = vec![T::zero(); ns];
            push_forward(
                model,
                h,
                &laws[h],
                policy,
                cell,
                &z,
                &mut scratch,
                &mut next,
            );
            laws.push(next);
        }
        aggs.push(z);
    }
    Ok((laws, aggs))
}
