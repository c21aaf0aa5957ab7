//! Game primitives: aggregates, dynamics, and the finite-horizon GMFG tuple.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{GmfgError, Result};
use crate::flow::check_simplex;
use crate::graphon::Graphon;
use crate::scalar::Real;
use crate::space::StateActionSpace;

/// Graphon-weighted mixture of the population's state laws seen by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T>(pub Vec<T>);

impl<T: Real> Aggregate<T> {
    pub fn mass(&self) -> T {
        self.0.iter().copied().sum()
    }
}

impl<T> Deref for Aggregate<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Transition kernels `P_h(.|s,a,z)` and rewards `r_h(s,a,z)`.
///
/// States and actions are passed as indices into the model's
/// [`StateActionSpace`]; `z` has one entry per state.
pub trait Dynamics<T: Real>: Send + Sync {
    fn transition(&self, h: usize, s: usize, a: usize, z: &[T], out: &mut [T]);
    fn reward(&self, h: usize, s: usize, a: usize, z: &[T]) -> T;
}

/// [`Dynamics`] from a pair of closures.
pub struct FnDynamics<P, R> {
    pub transition: P,
    pub reward: R,
}

impl<T, P, R> Dynamics<T> for FnDynamics<P, R>
where
    T: Real,
    P: Fn(usize, usize, usize, &[T], &mut [T]) + Send + Sync,
    R: Fn(usize, usize, usize, &[T]) -> T + Send + Sync,
{
    fn transition(&self, h: usize, s: usize, a: usize, z: &[T], out: &mut [T]) {
        (self.transition)(h, s, a, z, out)
    }

    fn reward(&self, h: usize, s: usize, a: usize, z: &[T]) -> T {
        (self.reward)(h, s, a, z)
    }
}

/// Finite-horizon graphon mean-field game. All agents share `initial`.
#[derive(Clone)]
pub struct GmfgModel<T: Real> {
    space: StateActionSpace<T>,
    horizon: usize,
    initial: Vec<T>,
    dynamics: Arc<dyn Dynamics<T>>,
    graphons: Vec<Graphon<T>>,
}

impl<T: Real> fmt::Debug for GmfgModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GmfgModel")
            .field("space", &self.space)
            .field("horizon", &self.horizon)
            .field("initial", &self.initial)
            .field("graphons", &self.graphons)
            .finish_non_exhaustive()
    }
}

impl<T: Real> GmfgModel<T> {
    /// `graphons` holds either one graphon shared by all steps or exactly `horizon`.
    pub fn new(
        space: StateActionSpace<T>,
        horizon: usize,
        initial: Vec<T>,
        dynamics: Arc<dyn Dynamics<T>>,
        graphons: Vec<Graphon<T>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(GmfgError::ShapeMismatch(
                "horizon must be at least 1".into(),
            ));
        }
        if initial.len() != space.n_states() {
            return Err(GmfgError::ShapeMismatch(format!(
                "initial distribution has {} entries for {} states",
                initial.len(),
                space.n_states()
            )));
        }
        check_simplex(&initial, || "initial distribution".into())?;
        let graphons = match graphons.len() {
            1 => vec![graphons[0].clone(); horizon],
            n if n == horizon => graphons,
            n => {
                return Err(GmfgError::ShapeMismatch(format!(
                    "{n} graphons for horizon {horizon}"
                )))
            }
        };
        for g in &graphons {
            g.validate()?;
        }
        Ok(Self {
            space,
            horizon,
            initial,
            dynamics,
            graphons,
        })
    }

    pub fn space(&self) -> &StateActionSpace<T> {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.space.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.space.n_actions()
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn graphon(&self, h: usize) -> &Graphon<T> {
        &self.graphons[h]
    }

    pub fn graphons(&self) -> &[Graphon<T>] {
        &self.graphons
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics<T>> {
        &self.dynamics
    }

    /// Same game with the interaction kernels replaced.
    pub fn with_graphons(&self, graphons: Vec<Graphon<T>>) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.horizon,
            self.initial.clone(),
            self.dynamics.clone(),
            graphons,
        )
    }

    pub fn with_graphon(&self, graphon: Graphon<T>) -> Result<Self> {
        self.with_graphons(vec![graphon])
    }

    pub fn with_dynamics(&self, dynamics: Arc<dyn Dynamics<T>>) -> Self {
        Self {
            dynamics,
            ..self.clone()
        }
    }

    pub fn with_initial(&self, initial: Vec<T>) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.horizon,
            initial,
            self.dynamics.clone(),
            self.graphons.clone(),
        )
    }

    pub fn transition(&self, h: usize, s: usize, a: usize, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states()];
        self.dynamics.transition(h, s, a, z, &mut out);
        out
    }

    pub fn reward(&self, h: usize, s: usize, a: usize, z: &[T]) -> T {
        self.dynamics.reward(h, s, a, z)
    }

    /// Checks the transition row at `(h, s, a, z)` is a probability vector.
    pub fn check_transition(&self, h: usize, s: usize, a: usize, z: &[T]) -> Result<()> {
        let row = self.transition(h, s, a, z);
        check_simplex(&row, || {
            format!("transition at step {h} state {s} action {a}")
        })
    }
}
