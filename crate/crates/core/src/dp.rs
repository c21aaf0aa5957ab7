//! Entropy-regularized finite-horizon dynamic programming for a single cell.
//!
//! With `Q_{H+1} = 0`:
//!
//! ```text
//! Q_h(s,a) = r_h(s,a,z_h) + sum_s' P_h(s'|s,a,z_h) V_{h+1}(s')
//! V_h(s)   = sum_a pi_h(a|s) (Q_h(s,a) - lambda log pi_h(a|s))       (evaluation)
//! V*_h(s)  = lambda log sum_a exp(Q*_h(s,a) / lambda)                   (soft optimum)
//! pi*_h(a|s) = exp((Q*_h(s,a) - V*_h(s)) / lambda)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{GmfgError, Result};
use crate::flow::DistributionFlow;
use crate::model::GmfgModel;
use crate::policy::PolicyProfile;
use crate::propagate::{aggregate_table, check_flow_shape, check_policy_shape};
use crate::scalar::{log_sum_exp, Real};

/// Action values indexed `(h, s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable<T> {
    horizon: usize,
    states: usize,
    actions: usize,
    data: Vec<T>,
}

/// State values indexed `(h, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VTable<T> {
    horizon: usize,
    states: usize,
    data: Vec<T>,
}

impl<T: Real> QTable<T> {
    pub fn zeros(horizon: usize, states: usize, actions: usize) -> Self {
        Self {
            horizon,
            states,
            actions,
            data: vec![T::zero(); horizon * states * actions],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[T] {
        let o = (h * self.states + s) * self.actions;
        &self.data[o..o + self.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, h: usize, s: usize) -> &mut [T] {
        let o = (h * self.states + s) * self.actions;
        &mut self.data[o..o + self.actions]
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> T {
        self.row(h, s)[a]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Real> VTable<T> {
    pub fn zeros(horizon: usize, states: usize) -> Self {
        Self {
            horizon,
            states,
            data: vec![T::zero(); horizon * states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, h: usize, s: usize) -> T {
        self.data[h * self.states + s]
    }

    pub fn set(&mut self, h: usize, s: usize, v: T) {
        self.data[h * self.states + s] = v;
    }

    pub fn step(&self, h: usize) -> &[T] {
        &self.data[h * self.states..(h + 1) * self.states]
    }

    /// `E_{s ~ dist} V_h(s)`.
    pub fn expect(&self, h: usize, dist: &[T]) -> T {
        self.step(h).iter().zip(dist).map(|(&v, &p)| v * p).sum()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

fn check_lambda_nonneg<T: Real>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(GmfgError::NegativeLambda(
            lambda.to_f64().unwrap_or(f64::NAN),
        ))
    }
}

pub(crate) fn check_lambda_pos<T: Real>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(GmfgError::NonPositiveLambda(
            lambda.to_f64().unwrap_or(f64::NAN),
        ))
    }
}

/// Continuation `r_h(s,a,z) + E[V_{h+1}(s')]` for every action at `(h, s)`.
fn backup<T: Real>(
    model: &GmfgModel<T>,
    h: usize,
    s: usize,
    z: &[T],
    next_v: Option<&[T]>,
    scratch: &mut [T],
    out: &mut [T],
) {
    let dynamics = model.dynamics();
    for (a, q) in out.iter_mut().enumerate() {
        let mut v = dynamics.reward(h, s, a, z);
        if let Some(next) = next_v {
            dynamics.transition(h, s, a, z, scratch);
            v += scratch.iter().zip(next).map(|(&p, &w)| p * w).sum::<T>();
        }
        *q = v;
    }
}

/// Evaluation with precomputed aggregates `aggs[h]` for one cell. Unless `strict`,
/// zero-probability actions contribute nothing (`0 log 0 = 0`).
pub(crate) fn evaluate_cell<T: Real>(
    policy: &PolicyProfile<T>,
    cell: usize,
    aggs: &[Vec<T>],
    model: &GmfgModel<T>,
    lambda: T,
    strict: bool,
) -> Result<(QTable<T>, VTable<T>)> {
    let (hz, ns, na) = (model.horizon(), model.n_states(), model.n_actions());
    let mut q = QTable::zeros(hz, ns, na);
    let mut v = VTable::zeros(hz, ns);
    let mut scratch = vec![T::zero(); ns];
    let mut row = vec![T::zero(); na];
    for h in (0..hz).rev() {
        let next = (h + 1 < hz).then(|| v.step(h + 1).to_vec());
        for s in 0..ns {
            backup(
                model,
                h,
                s,
                &aggs[h],
                next.as_deref(),
                &mut scratch,
                &mut row,
            );
            let pi = policy.row(cell, h, s);
            let mut value = T::zero();
            for (a, (&p, &qa)) in pi.iter().zip(&row).enumerate() {
                if p == T::zero() {
                    if strict && lambda > T::zero() {
                        return Err(GmfgError::ZeroProbability {
                            cell,
                            step: h,
                            state: s,
                            action: a,
                        });
                    }
                    continue;
                }
                value += p * (qa - lambda * p.ln());
            }
            q.row_mut(h, s).copy_from_slice(&row);
            v.set(h, s, value);
        }
    }
    Ok((q, v))
}

/// Regularized action values and values of `policy` at `cell`, aggregates read from `ref_flow`.
pub fn evaluate_policy<T: Real>(
    policy: &PolicyProfile<T>,
    ref_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
    lambda: T,
    cell: usize,
) -> Result<(QTable<T>, VTable<T>)> {
    check_lambda_nonneg(lambda)?;
    check_policy_shape(policy, model)?;
    check_flow_shape(ref_flow, policy, model)?;
    if cell >= policy.cells() {
        return Err(GmfgError::IndexOutOfRange {
            what: "cell",
            index: cell,
            len: policy.cells(),
        });
    }
    let aggs = aggregate_table(model, ref_flow);
    evaluate_cell(policy, cell, &aggs[cell], model, lambda, true)
}

/// [`evaluate_policy`] for every cell, sharing one aggregate table.
pub fn evaluate_policy_all<T: Real>(
    policy: &PolicyProfile<T>,
    ref_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
    lambda: T,
) -> Result<Vec<(QTable<T>, VTable<T>)>> {
    check_lambda_nonneg(lambda)?;
    check_policy_shape(policy, model)?;
    check_flow_shape(ref_flow, policy, model)?;
    let aggs = aggregate_table(model, ref_flow);
    (0..policy.cells())
        .map(|i| evaluate_cell(policy, i, &aggs[i], model, lambda, true))
        .collect()
}

pub(crate) fn soft_optimal_cell<T: Real>(
    aggs: &[Vec<T>],
    model: &GmfgModel<T>,
    lambda: T,
    policy: &mut PolicyProfile<T>,
    cell: usize,
) -> (QTable<T>, VTable<T>) {
    let (hz, ns, na) = (model.horizon(), model.n_states(), model.n_actions());
    let mut q = QTable::zeros(hz, ns, na);
    let mut v = VTable::zeros(hz, ns);
    let mut scratch = vec![T::zero(); ns];
    let mut row = vec![T::zero(); na];
    let mut scaled = vec![T::zero(); na];
    for h in (0..hz).rev() {
        let next = (h + 1 < hz).then(|| v.step(h + 1).to_vec());
        for s in 0..ns {
            backup(
                model,
                h,
                s,
                &aggs[h],
                next.as_deref(),
                &mut scratch,
                &mut row,
            );
            for (o, &x) in scaled.iter_mut().zip(&row) {
                *o = x / lambda;
            }
            let lse = log_sum_exp(&scaled);
            for (p, &x) in policy.row_mut(cell, h, s).iter_mut().zip(&scaled) {
                *p = (x - lse).exp();
            }
            q.row_mut(h, s).copy_from_slice(&row);
            v.set(h, s, lambda * lse);
        }
    }
    (q, v)
}

/// Soft best response to `ref_flow` for every cell, with its optimal values.
pub fn soft_optimal_policy<T: Real>(
    ref_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
    lambda: T,
) -> Result<(PolicyProfile<T>, Vec<VTable<T>>)> {
    let (policy, values, _) = soft_optimal_policy_with_q(ref_flow, model, lambda)?;
    Ok((policy, values))
}

/// [`soft_optimal_policy`] that also returns `Q*` per cell.
pub fn soft_optimal_policy_with_q<T: Real>(
    ref_flow: &DistributionFlow<T>,
    model: &GmfgModel<T>,
    lambda: T,
) -> Result<(PolicyProfile<T>, Vec<VTable<T>>, Vec<QTable<T>>)> {
    check_lambda_pos(lambda)?;
    if ref_flow.horizon() != model.horizon() || ref_flow.states() != model.n_states() {
        return Err(GmfgError::ShapeMismatch(
            "reference flow does not match model".into(),
        ));
    }
    let m = ref_flow.cells();
    let aggs = aggregate_table(model, ref_flow);
    let mut policy =
        PolicyProfile::uniform(m, model.horizon(), model.n_states(), model.n_actions());
    let mut values = Vec::with_capacity(m);
    let mut qs = Vec::with_capacity(m);
    for (i, agg) in aggs.iter().enumerate() {
        let (q, v) = soft_optimal_cell(agg, model, lambda, &mut policy, i);
        values.push(v);
        qs.push(q);
    }
    Ok((policy, values, qs))
}
