//! Population-level risks of an estimate, computed by exact enumeration over
//! the finite state and action spaces.

use gmfg_core::permute::permutations;
use gmfg_core::{
    agent_marginal, aggregate_at, gamma2, AgentGrid, DistributionFlow, GmfgModel, Graphon,
    PolicyProfile,
};

use crate::embed::Embedding;
use crate::error::{EstimationError, Result};
use crate::fit::{EstimatedModel, NextStateMode, Prediction, MAX_PERMUTATION_AGENTS};
use crate::scheme::{grid_position, PositionScheme};

/// A candidate `(f, g)` evaluated on embeddings.
pub trait Predictor {
    fn mode(&self) -> NextStateMode;
    fn predict(&self, h: usize, x: &Embedding) -> Prediction;
}

impl Predictor for EstimatedModel {
    fn mode(&self) -> NextStateMode {
        self.mode
    }

    fn predict(&self, h: usize, x: &Embedding) -> Prediction {
        EstimatedModel::predict(self, h, x)
    }
}

/// The conditional means `(f*, g*)` of a known game.
pub struct TruePredictor<'a> {
    pub model: &'a GmfgModel<f64>,
    pub mode: NextStateMode,
}

impl Predictor for TruePredictor<'_> {
    fn mode(&self) -> NextStateMode {
        self.mode
    }

    fn predict(&self, h: usize, x: &Embedding) -> Prediction {
        let m = self.model;
        let next = (h + 1 < m.horizon()).then(|| {
            let p = m.transition(h, x.s, x.a, &x.z);
            match self.mode {
                NextStateMode::Indicator => p,
                NextStateMode::Scalar => {
                    vec![p
                        .iter()
                        .enumerate()
                        .map(|(s, &q)| q * m.space().state_value(s))
                        .sum()]
                }
            }
        });
        Prediction {
            next,
            reward: m.reward(h, x.s, x.a, &x.z),
        }
    }
}

/// The law generating the data: behavior policies per episode and, for data
/// collected on a prescribed flow, that flow.
#[derive(Debug, Clone, Copy)]
pub struct DataLaw<'a> {
    pub truth: &'a GmfgModel<f64>,
    pub behavior: &'a [PolicyProfile<f64>],
    pub frozen: Option<&'a DistributionFlow<f64>>,
}

impl<'a> DataLaw<'a> {
    pub fn self_induced(truth: &'a GmfgModel<f64>, behavior: &'a [PolicyProfile<f64>]) -> Self {
        Self {
            truth,
            behavior,
            frozen: None,
        }
    }

    /// Distinct behavior policies with their episode shares and population flows.
    fn components(&self) -> Result<Vec<(f64, &'a PolicyProfile<f64>, DistributionFlow<f64>)>> {
        if self.behavior.is_empty() {
            return Err(EstimationError::Dataset("no behavior policies".into()));
        }
        let share = 1.0 / self.behavior.len() as f64;
        let mut out: Vec<(f64, &PolicyProfile<f64>, DistributionFlow<f64>)> = Vec::new();
        for pi in self.behavior {
            if let Some(c) = out.iter_mut().find(|c| c.1 == pi) {
                c.0 += share;
                continue;
            }
            let flow = match self.frozen {
                Some(f) => f.clone(),
                None => gamma2(pi, self.truth)?,
            };
            out.push((share, pi, flow));
        }
        Ok(out)
    }
}

fn squared_error(mode: NextStateMode, target: usize, value: f64, pred: &[f64]) -> f64 {
    match mode {
        NextStateMode::Indicator => pred
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                if k == target {
                    (1.0 - f).powi(2)
                } else {
                    f * f
                }
            })
            .sum(),
        NextStateMode::Scalar => (value - pred[0]).powi(2),
    }
}

/// Expected loss at step `h` for an agent at each of `positions`, averaged over them.
fn risk_at_positions<P: Predictor + ?Sized>(
    pred: &P,
    graphon: &Graphon<f64>,
    law: &DataLaw<'_>,
    positions: &[f64],
    h: usize,
) -> Result<f64> {
    let truth = law.truth;
    if h >= truth.horizon() {
        return Err(EstimationError::Dataset(format!(
            "step {h} beyond horizon {}",
            truth.horizon()
        )));
    }
    let mode = pred.mode();
    let (ns, na) = (truth.n_states(), truth.n_actions());
    let mut total = 0.0;
    for (share, pi, flow) in law.components()? {
        let cells = AgentGrid::new(pi.cells());
        for &x in positions {
            let (laws, true_aggs) = agent_marginal(x, pi, &flow, truth)?;
            let z_true = &true_aggs[h];
            let z_est = aggregate_at(graphon, &flow, x, h).0;
            let cell = cells.cell_of(x);
            let mut acc = 0.0;
            for s in 0..ns {
                let ps = laws[h][s];
                if ps == 0.0 {
                    continue;
                }
                for a in 0..na {
                    let w = ps * pi.row(cell, h, s)[a];
                    if w == 0.0 {
                        continue;
                    }
                    let p = pred.predict(h, &Embedding::new(s, a, z_est.clone()));
                    let r = truth.reward(h, s, a, z_true);
                    let mut loss = (r - p.reward).powi(2);
                    if let Some(next) = p.next.as_deref() {
                        let trans = truth.transition(h, s, a, z_true);
                        for (sn, &q) in trans.iter().enumerate().take(ns) {
                            if q > 0.0 {
                                loss += q * squared_error(
                                    mode,
                                    sn,
                                    truth.space().state_value(sn),
                                    next,
                                );
                            }
                        }
                    }
                    acc += w * loss;
                }
            }
            total += share * acc;
        }
    }
    Ok(total / positions.len() as f64)
}

/// Risk at step `h` with the sampled agents at the scheme's positions
/// (grid slots in label order for unknown positions).
pub fn risk_conditional<P: Predictor + ?Sized>(
    pred: &P,
    graphon: &Graphon<f64>,
    law: &DataLaw<'_>,
    scheme: &PositionScheme,
    h: usize,
) -> Result<f64> {
    scheme.validate()?;
    risk_at_positions(pred, graphon, law, &scheme.positions(), h)
}

/// Risk at step `h` integrated over positions by a right-endpoint Riemann sum with `nodes` points.
pub fn risk_population<P: Predictor + ?Sized>(
    pred: &P,
    graphon: &Graphon<f64>,
    law: &DataLaw<'_>,
    nodes: usize,
    h: usize,
) -> Result<f64> {
    if nodes == 0 {
        return Err(EstimationError::Dataset(
            "quadrature needs at least one node".into(),
        ));
    }
    let positions: Vec<f64> = (0..nodes).map(|k| grid_position(k, nodes)).collect();
    risk_at_positions(pred, graphon, law, &positions, h)
}

/// Minimum of [`risk_conditional`] over `W^φ` for all block permutations `φ` of the `N` slots.
/// Returns the value and the lexicographically first minimizing permutation.
pub fn risk_perm_invariant<P: Predictor + ?Sized>(
    pred: &P,
    graphon: &Graphon<f64>,
    law: &DataLaw<'_>,
    scheme: &PositionScheme,
    h: usize,
) -> Result<(f64, Vec<usize>)> {
    let n = match scheme {
        PositionScheme::UnknownGrid { n } => *n,
        _ => {
            return Err(EstimationError::Scheme(
                "permutation-invariant risk needs unknown grid positions".into(),
            ))
        }
    };
    if n > MAX_PERMUTATION_AGENTS {
        return Err(EstimationError::TooManyAgents {
            n,
            max: MAX_PERMUTATION_AGENTS,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let w = graphon.permuted(&perm)?;
        let r = risk_conditional(pred, &w, law, scheme, h)?;
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, perm));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Risk summed over all steps.
pub fn risk_conditional_total<P: Predictor + ?Sized>(
    pred: &P,
    graphons: &[Graphon<f64>],
    law: &DataLaw<'_>,
    scheme: &PositionScheme,
) -> Result<f64> {
    let mut total = 0.0;
    for h in 0..law.truth.horizon() {
        let g = if graphons.len() == 1 {
            &graphons[0]
        } else {
            &graphons[h]
        };
        total += risk_conditional(pred, g, law, scheme, h)?;
    }
    Ok(total)
}
