use gmfg_core::GmfgError;
use gmfg_estimation::EstimationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Core(#[from] GmfgError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
