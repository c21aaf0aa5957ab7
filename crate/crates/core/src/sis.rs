//! Two-state epidemic game: susceptible agents choose between going out (`U`)
//! and staying protected (`D`); infection pressure is the aggregate infected mass.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graphon::Graphon;
use crate::model::{Dynamics, GmfgModel};
use crate::scalar::{lit, Real};
use crate::space::StateActionSpace;

pub const SUSCEPTIBLE: usize = 0;
pub const INFECTED: usize = 1;
pub const UP: usize = 0;
pub const DOWN: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SisParams {
    pub horizon: usize,
    /// `P(I | S, U, z) = infection * z(I)`.
    pub infection: f64,
    /// `P(S | I, ., .)`.
    pub recovery: f64,
    pub infected_cost: f64,
    pub protect_cost: f64,
    pub initial_infected: f64,
}

impl Default for SisParams {
    fn default() -> Self {
        Self {
            horizon: 50,
            infection: 0.8,
            recovery: 0.2,
            infected_cost: 10.0,
            protect_cost: 2.5,
            initial_infected: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SisDynamics<T> {
    infection: T,
    recovery: T,
    infected_cost: T,
    protect_cost: T,
}

impl<T: Real> SisDynamics<T> {
    pub fn new(params: &SisParams) -> Self {
        Self {
            infection: lit(params.infection),
            recovery: lit(params.recovery),
            infected_cost: lit(params.infected_cost),
            protect_cost: lit(params.protect_cost),
        }
    }
}

impl<T: Real> Dynamics<T> for SisDynamics<T> {
    fn transition(&self, _h: usize, s: usize, a: usize, z: &[T], out: &mut [T]) {
        let to_infected = if s == INFECTED {
            T::one() - self.recovery
        } else if a == UP {
            (self.infection * z[INFECTED]).min(T::one()).max(T::zero())
        } else {
            T::zero()
        };
        out[INFECTED] = to_infected;
        out[SUSCEPTIBLE] = T::one() - to_infected;
    }

    fn reward(&self, _h: usize, s: usize, a: usize, _z: &[T]) -> T {
        let mut r = T::zero();
        if s == INFECTED {
            r -= self.infected_cost;
        }
        if a == DOWN {
            r -= self.protect_cost;
        }
        r
    }
}

/// Rewards mapped through `r -> scale * r + shift`; transitions unchanged.
pub struct AffineReward<T> {
    inner: Arc<dyn Dynamics<T>>,
    scale: T,
    shift: T,
}

impl<T: Real> AffineReward<T> {
    pub fn new(inner: Arc<dyn Dynamics<T>>, scale: T, shift: T) -> Self {
        Self {
            inner,
            scale,
            shift,
        }
    }
}

impl<T: Real> Dynamics<T> for AffineReward<T> {
    fn transition(&self, h: usize, s: usize, a: usize, z: &[T], out: &mut [T]) {
        self.inner.transition(h, s, a, z, out)
    }

    fn reward(&self, h: usize, s: usize, a: usize, z: &[T]) -> T {
        self.scale * self.inner.reward(h, s, a, z) + self.shift
    }
}

/// Same game with rewards shifted by `c`.
pub fn shift_rewards<T: Real>(model: &GmfgModel<T>, c: T) -> GmfgModel<T> {
    model.with_dynamics(Arc::new(AffineReward::new(
        model.dynamics().clone(),
        T::one(),
        c,
    )))
}

/// Same game with rewards mapped affinely from `[lo, hi]` onto `[0, 1]`.
pub fn rescale_rewards<T: Real>(model: &GmfgModel<T>, lo: T, hi: T) -> GmfgModel<T> {
    let scale = (hi - lo).recip();
    model.with_dynamics(Arc::new(AffineReward::new(
        model.dynamics().clone(),
        scale,
        -lo * scale,
    )))
}

/// Reward range `[-(infected_cost + protect_cost), 0]` of the game.
pub fn sis_reward_range(params: &SisParams) -> (f64, f64) {
    (-(params.infected_cost + params.protect_cost), 0.0)
}

pub fn sis_space<T: Real>() -> StateActionSpace<T> {
    StateActionSpace::new(vec![T::zero(), T::one()], vec!["U".into(), "D".into()])
        .expect("static space is valid")
}

/// Epidemic game on `graphon` (shared by all steps).
pub fn sis_model<T: Real>(params: &SisParams, graphon: Graphon<T>) -> Result<GmfgModel<T>> {
    let p: T = lit(params.initial_infected);
    GmfgModel::new(
        sis_space(),
        params.horizon,
        vec![T::one() - p, p],
        Arc::new(SisDynamics::new(params)),
        vec![graphon],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_rows_are_simplices() {
        let m = sis_model::<f64>(&SisParams::default(), Graphon::exp(3.0).unwrap()).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                for zi in [0.0, 0.3, 1.0] {
                    m.check_transition(0, s, a, &[1.0 - zi, zi]).unwrap();
                }
            }
        }
        assert_eq!(
            m.transition(0, SUSCEPTIBLE, UP, &[0.5, 0.5]),
            vec![0.6, 0.4]
        );
        assert_eq!(
            m.transition(0, SUSCEPTIBLE, DOWN, &[0.0, 1.0]),
            vec![1.0, 0.0]
        );
        assert_eq!(m.reward(0, INFECTED, DOWN, &[0.5, 0.5]), -12.5);
    }

    #[test]
    fn rescaled_rewards_land_in_unit_interval() {
        let params = SisParams::default();
        let (lo, hi) = sis_reward_range(&params);
        let m = rescale_rewards(
            &sis_model::<f64>(&params, Graphon::constant(1.0).unwrap()).unwrap(),
            lo,
            hi,
        );
        assert_eq!(m.reward(0, INFECTED, DOWN, &[0.0, 1.0]), 0.0);
        assert_eq!(m.reward(0, SUSCEPTIBLE, UP, &[0.0, 1.0]), 1.0);
        assert_eq!(m.reward(0, SUSCEPTIBLE, DOWN, &[0.0, 1.0]), 0.8);
    }
}
