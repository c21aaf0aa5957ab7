use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("could not parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("equilibrium iteration did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] gmfg_core::GmfgError),
    #[error(transparent)]
    Ppo(#[from] gmfg_ppo::PpoError),
    #[error(transparent)]
    Sim(#[from] gmfg_sim::SimError),
    #[error(transparent)]
    Estimation(#[from] gmfg_estimation::EstimationError),
}

impl BenchError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotConverged(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
