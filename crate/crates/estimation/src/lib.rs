//! Estimation of dynamics, rewards and interaction graphons from trajectories
//! of finitely many sampled agents, and the risks used to judge the estimates.

pub mod dataset;
pub mod embed;
pub mod error;
pub mod fit;
pub mod krr;
pub mod risk;
pub mod scheme;

pub use dataset::{Dataset, Episode, Transition};
pub use embed::{embed, empirical_aggregate, AggregateSource, Embedding};
pub use error::{EstimationError, Result};
pub use fit::{
    fit, fit_known_flow, fit_known_flow_with, fit_unknown, fit_unknown_with, fit_with,
    project_simplex, CandidateSet, EstimatedModel, FitOptions, NextStateMode, Pooling, Prediction,
    Selection, StepEstimate, DEFAULT_RIDGE,
};
pub use krr::{Bandwidth, KernelKind, KernelRegressor};
pub use risk::{
    risk_conditional, risk_conditional_total, risk_perm_invariant, risk_population, DataLaw,
    Predictor, TruePredictor,
};
pub use scheme::{grid_position, PositionScheme};
