use gmfg_core::GmfgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("need at least two sampled agents, got {0}")]
    TooFewAgents(usize),
    #[error("empty candidate set")]
    NoCandidates,
    #[error("ridge parameter must be positive, got {0}")]
    Ridge(f64),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("{0}")]
    Scheme(String),
    #[error("pooled embeddings need a single behavior policy; found {0} distinct")]
    HeterogeneousPolicies(usize),
    #[error("exhaustive permutation search over {n}! assignments is limited to n <= {max}")]
    TooManyAgents { n: usize, max: usize },
    #[error("kernel matrix is not positive definite")]
    Singular,
    #[error("dataset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] GmfgError),
}

pub type Result<T, E = EstimationError> = std::result::Result<T, E>;
