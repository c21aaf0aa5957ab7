//! Finite-state graphon mean-field games on a uniform agent grid.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the unsuffixed aliases below fix it to `f64`.

pub mod dp;
pub mod error;
pub mod exploit;
pub mod flow;
pub mod graphon;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod permute;
pub mod policy;
pub mod propagate;
pub mod scalar;
pub mod sis;
pub mod space;

pub use dp::{
    evaluate_policy, evaluate_policy_all, soft_optimal_policy, soft_optimal_policy_with_q, QTable,
    VTable,
};
pub use error::{GmfgError, Result};
pub use exploit::{exploitability, exploitability_per_cell};
pub use flow::{simplex_tol, DistributionFlow};
pub use graphon::Graphon;
pub use grid::AgentGrid;
pub use metrics::{distance_flow, distance_policy};
pub use model::{Aggregate, Dynamics, FnDynamics, GmfgModel};
pub use permute::{apply_block_bijection, inverse_permutation, permutations, BlockBijection};
pub use policy::PolicyProfile;
pub use propagate::{
    agent_marginal, aggregate_at, aggregate_table, compute_aggregate, gamma2, gamma3,
};
pub use scalar::Real;
pub use space::StateActionSpace;

pub type Flow = DistributionFlow<f64>;
pub type Policy = PolicyProfile<f64>;
pub type Model = GmfgModel<f64>;
pub type Kernel = Graphon<f64>;
pub type Space = StateActionSpace<f64>;
pub type Q = QTable<f64>;
pub type V = VTable<f64>;

pub type Flow32 = DistributionFlow<f32>;
pub type Policy32 = PolicyProfile<f32>;
pub type Model32 = GmfgModel<f32>;
pub type Kernel32 = Graphon<f32>;
