//! Mirror-descent policy optimization with fictitious-play flow averaging for
//! graphon mean-field games, generic over the source of flow and action-value
//! estimates.

pub mod error;
pub mod oracle;
pub mod run;
pub mod schedule;
pub mod step;

pub use error::{PpoError, Result};
pub use oracle::{BoxError, ExactOracle, Oracle, OracleResult};
pub use run::{run_gmfg_ppo, Metrics, RunHistory, RunOptions};
pub use schedule::Schedules;
pub use step::{
    mirror_descent_profile, mirror_descent_step, mix_flow, mix_uniform, proximal_objective,
};
