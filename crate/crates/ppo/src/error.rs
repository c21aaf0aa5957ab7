use gmfg_core::GmfgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid schedule: {field} = {value}")]
    Schedule { field: &'static str, value: f64 },
    #[error("zero probability at action {action} in mirror step input")]
    ZeroProbability { action: usize },
    #[error("oracle failed at iteration {iteration}: {source}")]
    Oracle {
        iteration: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Core(#[from] GmfgError),
}

pub type Result<T, E = PpoError> = std::result::Result<T, E>;
