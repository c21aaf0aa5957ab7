//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use gmfg_core::sis::{sis_model, SisParams};
use gmfg_core::{GmfgModel, Graphon};
use gmfg_estimation::{CandidateSet, FitOptions, PositionScheme, DEFAULT_RIDGE};
use gmfg_ppo::Schedules;
use gmfg_sim::{OracleConfig, Refit};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// A graphon family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphonSpec {
    Exp {
        theta: f64,
    },
    Sbm {
        blocks: usize,
        intra: f64,
        inter: f64,
    },
    Constant {
        p: f64,
    },
    Step {
        values: Vec<Vec<f64>>,
    },
}

impl GraphonSpec {
    pub fn build(&self) -> Result<Graphon<f64>> {
        let g = match self {
            GraphonSpec::Exp { theta } => Graphon::exp(*theta),
            GraphonSpec::Sbm {
                blocks,
                intra,
                inter,
            } => Graphon::sbm(*blocks, *intra, *inter),
            GraphonSpec::Constant { p } => Graphon::constant(*p),
            GraphonSpec::Step { values } => Graphon::step(values.clone()),
        };
        g.map_err(|e| BenchError::config("graphon", e.to_string()))
    }
}

/// Parses `exp:3`, `sbm:2:0.9:0.3` and `constant:0.5`.
impl FromStr for GraphonSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |k: usize| -> Result<f64> {
            parts.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| {
                BenchError::config("graphon", format!("cannot read parameter {k} of `{s}`"))
            })
        };
        let parsed = match parts[0] {
            "exp" if parts.len() == 2 => GraphonSpec::Exp { theta: num(1)? },
            "constant" if parts.len() == 2 => GraphonSpec::Constant { p: num(1)? },
            "sbm" if parts.len() == 4 => {
                let blocks = parts[1].parse().map_err(|_| {
                    BenchError::config("graphon", format!("bad block count in `{s}`"))
                })?;
                GraphonSpec::Sbm {
                    blocks,
                    intra: num(2)?,
                    inter: num(3)?,
                }
            }
            _ => {
                return Err(BenchError::config(
                    "graphon",
                    format!("unknown graphon `{s}`"),
                ))
            }
        };
        parsed.build()?;
        Ok(parsed)
    }
}

/// The epidemic game: transition and reward constants plus the true graphon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub graphon: GraphonSpec,
    #[serde(default)]
    pub sis: SisParams,
}

impl ModelSpec {
    pub fn build(&self) -> Result<GmfgModel<f64>> {
        sis_model(&self.sis, self.graphon.build()?)
            .map_err(|e| BenchError::config("model.sis", e.to_string()))
    }
}

fn default_agents() -> usize {
    7
}

fn default_candidates() -> Vec<GraphonSpec> {
    vec![
        GraphonSpec::Exp { theta: 3.0 },
        GraphonSpec::Exp { theta: 1.0 },
        GraphonSpec::Constant { p: 0.5 },
        GraphonSpec::Sbm {
            blocks: 2,
            intra: 0.9,
            inter: 0.3,
        },
    ]
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

/// Where the loop gets its flows and action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    /// Exact computation on the true game.
    Exact,
    /// Exact computation on the game with the graphon replaced by a constant.
    ConstantGraphon { p: f64 },
    /// Estimated models fitted on simulator data.
    Algorithm2 {
        #[serde(default = "default_agents")]
        agents: usize,
        episodes: usize,
        #[serde(default = "default_candidates")]
        candidates: Vec<GraphonSpec>,
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default)]
        fit: FitOptions,
        #[serde(default)]
        refit: Refit,
        #[serde(default)]
        behavior_mix: f64,
        #[serde(default)]
        unknown_positions: bool,
    },
    /// Histogram flows and Monte Carlo action values.
    Empirical {
        #[serde(default = "default_agents")]
        agents: usize,
        episodes: usize,
    },
}

impl OracleSpec {
    pub fn oracle_config(&self) -> Result<Option<OracleConfig>> {
        let OracleSpec::Algorithm2 {
            agents,
            episodes,
            candidates,
            ridge,
            fit,
            refit,
            behavior_mix,
            unknown_positions,
        } = self
        else {
            return Ok(None);
        };
        let graphons = candidates
            .iter()
            .map(GraphonSpec::build)
            .collect::<Result<Vec<_>>>()?;
        let scheme = if *unknown_positions {
            PositionScheme::UnknownGrid { n: *agents }
        } else {
            PositionScheme::KnownGrid { n: *agents }
        };
        let mut cfg = OracleConfig::new(
            scheme,
            *episodes,
            CandidateSet::new(graphons).with_ridge(*ridge),
            1.0,
        );
        cfg.fit = *fit;
        cfg.refit = *refit;
        cfg.behavior_mix = *behavior_mix;
        Ok(Some(cfg))
    }
}

/// Settings of the damped fixed-point solve that provides the reference
/// equilibrium for the distance columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSpec {
    pub enabled: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            tol: 1e-8,
            max_iter: 20_000,
            damping: 0.2,
        }
    }
}

fn default_cells() -> usize {
    16
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    /// Grid size `M`.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub schedules: Schedules,
    pub oracle: OracleSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Directory receiving the CSV files; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fill the `wall_clock` column; when off it is left empty so that
    /// repeated runs produce identical files.
    #[serde(default)]
    pub wall_clock: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        if self.cells == 0 {
            return Err(BenchError::config("cells", "must be at least 1"));
        }
        self.schedules
            .validate()
            .map_err(|e| BenchError::config("schedules", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(BenchError::config("seeds", "need at least one seed"));
        }
        let r = &self.reference;
        if r.enabled && !(r.tol > 0.0) {
            return Err(BenchError::config(
                "reference.tol",
                format!("must be positive, got {}", r.tol),
            ));
        }
        if r.enabled && !(r.damping > 0.0 && r.damping <= 1.0) {
            return Err(BenchError::config(
                "reference.damping",
                format!("must lie in (0, 1], got {}", r.damping),
            ));
        }
        match &self.oracle {
            OracleSpec::Exact => {}
            OracleSpec::ConstantGraphon { p } => {
                Graphon::constant(*p).map_err(|e| BenchError::config("oracle.p", e.to_string()))?;
            }
            OracleSpec::Algorithm2 { .. } => {
                let cfg = self.oracle_config()?.expect("algorithm2 arm");
                cfg.validate()
                    .map_err(|e| BenchError::config("oracle", e.to_string()))?;
            }
            OracleSpec::Empirical { agents, episodes } => {
                if *agents < 2 {
                    return Err(BenchError::config(
                        "oracle.agents",
                        "need at least two agents",
                    ));
                }
                if *episodes == 0 {
                    return Err(BenchError::config("oracle.episodes", "must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Simulator oracle settings with the regularization of the schedules.
    pub fn oracle_config(&self) -> Result<Option<OracleConfig>> {
        Ok(self.oracle.oracle_config()?.map(|mut c| {
            c.lambda = self.schedules.lambda;
            c
        }))
    }
}
