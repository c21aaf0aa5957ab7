//! Model-free baseline: flows and action values read directly off the
//! sampled agents' own trajectories.

use gmfg_core::{AgentGrid, DistributionFlow, PolicyProfile, QTable};
use gmfg_estimation::{Dataset, PositionScheme};

use crate::error::{Result, SimError};

/// Sampled agents standing in for each of `cells` grid cells: the agents whose
/// position falls in the cell, else the agent nearest to its midpoint.
pub fn residents(data: &Dataset, cells: usize) -> Result<Vec<Vec<usize>>> {
    let n = match data.scheme() {
        PositionScheme::KnownGrid { n } => *n,
        _ => {
            return Err(SimError::Config(
                "the empirical baseline needs known grid positions".into(),
            ))
        }
    };
    let grid = AgentGrid::new(cells);
    let positions = data.scheme().positions();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (i, &x) in positions.iter().enumerate() {
        out[grid.cell_of(x)].push(i);
    }
    for (k, r) in out.iter_mut().enumerate() {
        if r.is_empty() {
            let mid: f64 = grid.position(k);
            let nearest = (0..n)
                .min_by(|&a, &b| {
                    (positions[a] - mid)
                        .abs()
                        .total_cmp(&(positions[b] - mid).abs())
                })
                .expect("at least two agents");
            r.push(nearest);
        }
    }
    Ok(out)
}

/// Per-cell state histograms of the resident agents over all episodes.
pub fn empirical_flow_baseline(data: &Dataset, cells: usize) -> Result<DistributionFlow<f64>> {
    if data.n_episodes() == 0 {
        return Err(SimError::Config("empty dataset".into()));
    }
    let res = residents(data, cells)?;
    let (hz, ns) = (data.horizon(), data.space().n_states());
    let mut flow = DistributionFlow::zeros(cells, hz, ns);
    for (k, agents) in res.iter().enumerate() {
        let w = 1.0 / (agents.len() * data.n_episodes()) as f64;
        for ep in data.episodes() {
            for &i in agents {
                for h in 0..hz {
                    flow.dist_mut(k, h)[ep.get(i, h).s] += w;
                }
            }
        }
    }
    Ok(flow)
}

/// Monte Carlo action values: the mean regularized return-to-go
/// `Σ_{h' ≥ h} r_{h'} - λ Σ_{h' > h} log π(a_{h'} | s_{h'})` of the resident
/// agents' visits to `(h, s, a)`. Unvisited entries use all agents' visits, else 0.
pub fn monte_carlo_q(
    data: &Dataset,
    policy: &PolicyProfile<f64>,
    lambda: f64,
) -> Result<Vec<QTable<f64>>> {
    let cells = policy.cells();
    let res = residents(data, cells)?;
    let (hz, ns, na) = (
        data.horizon(),
        data.space().n_states(),
        data.space().n_actions(),
    );
    let grid = AgentGrid::new(cells);
    let positions = data.scheme().positions();
    let n = data.n_agents();
    let idx = |h: usize, s: usize, a: usize| (h * ns + s) * na + a;
    // Per-agent sums and counts of returns.
    let mut sums = vec![vec![0.0; hz * ns * na]; n];
    let mut counts = vec![vec![0.0; hz * ns * na]; n];
    for ep in data.episodes() {
        for i in 0..n {
            let cell = grid.cell_of(positions[i]);
            let mut to_go = 0.0;
            for h in (0..hz).rev() {
                let t = ep.get(i, h);
                let k = idx(h, t.s, t.a);
                to_go += t.r;
                sums[i][k] += to_go;
                counts[i][k] += 1.0;
                to_go -= lambda * policy.row(cell, h, t.s)[t.a].ln();
            }
        }
    }
    let mut out = Vec::with_capacity(cells);
    for agents in &res {
        let mut q = QTable::zeros(hz, ns, na);
        for h in 0..hz {
            for s in 0..ns {
                for a in 0..na {
                    let k = idx(h, s, a);
                    let total = |who: &mut dyn Iterator<Item = usize>| {
                        who.fold((0.0, 0.0), |(x, c), i| (x + sums[i][k], c + counts[i][k]))
                    };
                    let (mut x, mut c) = total(&mut agents.iter().copied());
                    if c == 0.0 {
                        (x, c) = total(&mut (0..n));
                    }
                    q.row_mut(h, s)[a] = if c > 0.0 { x / c } else { 0.0 };
                }
            }
        }
        out.push(q);
    }
    Ok(out)
}
