//! Experiments on the epidemic graphon game: the learning loop under exact,
//! estimated, model-free and misspecified oracles, with CSV metrics.

pub mod cli;
pub mod config;
pub mod error;
pub mod ne;
pub mod runner;

pub use config::{ExperimentConfig, GraphonSpec, ModelSpec, OracleSpec, ReferenceSpec};
pub use error::{BenchError, Result};
pub use ne::{find_ne_fixed_point, Equilibrium, NeOptions};
pub use runner::{
    quantile, reference_for, run_experiment, run_seed, ExperimentOutput, Row, SeedRun,
    AGGREGATE_HEADER, SEED_HEADER,
};
