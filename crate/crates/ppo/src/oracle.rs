use gmfg_core::{
    evaluate_policy_all, gamma2, DistributionFlow, GmfgModel, PolicyProfile, QTable, Real,
};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;
pub type OracleResult<X> = std::result::Result<X, BoxError>;

/// Source of the flow and action-value estimates consumed by the loop.
///
/// `t = 0` is the initialization call for the first averaged flow.
pub trait Oracle<T: Real> {
    /// `(cells, horizon, states, actions)` of the policies this oracle accepts.
    fn policy_shape(&self) -> (usize, usize, usize, usize);

    fn begin(&mut self, _seed: u64) -> OracleResult<()> {
        Ok(())
    }

    /// Flow induced by `policy`.
    fn estimate_flow(
        &mut self,
        t: usize,
        policy: &PolicyProfile<T>,
    ) -> OracleResult<DistributionFlow<T>>;

    /// Per-cell regularized action values of `policy` in the game frozen at `bar_flow`.
    fn estimate_q(
        &mut self,
        t: usize,
        policy: &PolicyProfile<T>,
        bar_flow: &DistributionFlow<T>,
    ) -> OracleResult<Vec<QTable<T>>>;
}

/// Exact flows and action values computed on a known model.
#[derive(Debug, Clone)]
pub struct ExactOracle<T: Real> {
    model: GmfgModel<T>,
    lambda: T,
    cells: usize,
}

impl<T: Real> ExactOracle<T> {
    pub fn new(model: GmfgModel<T>, lambda: T, cells: usize) -> Self {
        Self {
            model,
            lambda,
            cells,
        }
    }

    pub fn model(&self) -> &GmfgModel<T> {
        &self.model
    }
}

impl<T: Real> Oracle<T> for ExactOracle<T> {
    fn policy_shape(&self) -> (usize, usize, usize, usize) {
        (
            self.cells,
            self.model.horizon(),
            self.model.n_states(),
            self.model.n_actions(),
        )
    }

    fn estimate_flow(
        &mut self,
        _t: usize,
        policy: &PolicyProfile<T>,
    ) -> OracleResult<DistributionFlow<T>> {
        Ok(gamma2(policy, &self.model)?)
    }

    fn estimate_q(
        &mut self,
        _t: usize,
        policy: &PolicyProfile<T>,
        bar_flow: &DistributionFlow<T>,
    ) -> OracleResult<Vec<QTable<T>>> {
        let tables = evaluate_policy_all(policy, bar_flow, &self.model, self.lambda)?;
        Ok(tables.into_iter().map(|(q, _)| q).collect())
    }
}

impl<T: Real, O: Oracle<T> + ?Sized> Oracle<T> for &mut O {
    fn policy_shape(&self) -> (usize, usize, usize, usize) {
        (**self).policy_shape()
    }

    fn begin(&mut self, seed: u64) -> OracleResult<()> {
        (**self).begin(seed)
    }

    fn estimate_flow(
        &mut self,
        t: usize,
        policy: &PolicyProfile<T>,
    ) -> OracleResult<DistributionFlow<T>> {
        (**self).estimate_flow(t, policy)
    }

    fn estimate_q(
        &mut self,
        t: usize,
        policy: &PolicyProfile<T>,
        bar_flow: &DistributionFlow<T>,
    ) -> OracleResult<Vec<QTable<T>>> {
        (**self).estimate_q(t, policy, bar_flow)
    }
}
