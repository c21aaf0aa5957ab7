//! Population simulator for graphon mean-field games and the oracles that
//! turn simulated data into inputs for policy optimization.

pub mod baseline;
pub mod error;
pub mod oracle;
pub mod rollout;

pub use baseline::{empirical_flow_baseline, monte_carlo_q, residents};
pub use error::{Result, SimError};
pub use oracle::{
    algorithm2_step, empirical_initial, estimate_flow_model, estimate_q_model, Algorithm2Step,
    EmpiricalOracle, EstimationOracle, OracleConfig, Refit,
};
pub use rollout::{
    agent_rng, merge_datasets, rollout, simulate_agent, RequestKind, Rollout, SimRequest,
};
