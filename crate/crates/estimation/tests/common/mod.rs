#![allow(dead_code)]

use gmfg_core::sis::{sis_model, SisParams};
use gmfg_core::{aggregate_at, gamma2, AgentGrid, GmfgModel, Graphon, PolicyProfile};
use gmfg_estimation::{Dataset, Episode, PositionScheme, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sis(graphon: Graphon<f64>, horizon: usize) -> GmfgModel<f64> {
    sis_model(
        &SisParams {
            horizon,
            ..SisParams::default()
        },
        graphon,
    )
    .unwrap()
}

fn draw(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.len() - 1
}

/// Agents at `positions` (slot order given by the scheme) playing `policy` in
/// the game induced by its own flow, aggregates read from that flow.
pub fn sample(
    model: &GmfgModel<f64>,
    policy: &PolicyProfile<f64>,
    scheme: PositionScheme,
    positions: &[f64],
    episodes: usize,
    seed: u64,
) -> Dataset {
    let flow = gamma2(policy, model).unwrap();
    let grid = AgentGrid::new(policy.cells());
    let hz = model.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = (0..episodes)
        .map(|_| {
            let mut rec = Vec::new();
            for &x in positions {
                let cell = grid.cell_of(x);
                let mut s = draw(model.initial(), rng.gen());
                for h in 0..hz {
                    let z = aggregate_at(model.graphon(h), &flow, x, h).0;
                    let a = draw(policy.row(cell, h, s), rng.gen());
                    let r = model.reward(h, s, a, &z);
                    let next =
                        (h + 1 < hz).then(|| draw(&model.transition(h, s, a, &z), rng.gen()));
                    rec.push(Transition {
                        s,
                        a,
                        r,
                        s_next: next,
                    });
                    if let Some(n) = next {
                        s = n;
                    }
                }
            }
            Episode::new("pi", positions.len(), hz, rec).unwrap()
        })
        .collect();
    Dataset::new(model.space().clone(), hz, scheme, eps).unwrap()
}

pub fn sample_grid(
    model: &GmfgModel<f64>,
    policy: &PolicyProfile<f64>,
    n: usize,
    episodes: usize,
    seed: u64,
) -> Dataset {
    let scheme = PositionScheme::KnownGrid { n };
    let pos = scheme.positions();
    sample(model, policy, scheme, &pos, episodes, seed)
}

/// Dataset from explicit per-episode `(s, a, r)` rows for every agent and a
/// fixed state path; `rows[tau][i][h] = (s, a, r)`.
pub fn from_rows(
    space_states: usize,
    scheme: PositionScheme,
    rows: &[Vec<Vec<(usize, usize, f64)>>],
) -> Dataset {
    let space = gmfg_core::StateActionSpace::new(
        (0..space_states).map(|s| s as f64).collect(),
        vec!["a0".into(), "a1".into()],
    )
    .unwrap();
    let n = scheme.n();
    let hz = rows[0][0].len();
    let eps = rows
        .iter()
        .map(|ep| {
            let mut rec = Vec::new();
            for agent in ep {
                for h in 0..hz {
                    let (s, a, r) = agent[h];
                    rec.push(Transition {
                        s,
                        a,
                        r,
                        s_next: (h + 1 < hz).then(|| agent[h + 1].0),
                    });
                }
            }
            Episode::new("pi", n, hz, rec).unwrap()
        })
        .collect();
    Dataset::new(space, hz, scheme, eps).unwrap()
}
