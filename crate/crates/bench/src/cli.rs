//! Command-line entry point. Returns the process exit code instead of exiting
//! so it can be driven from tests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gmfg_core::sis::{sis_model, SisParams};
use gmfg_core::PolicyProfile;
use gmfg_estimation::{
    fit_unknown_with, fit_with, risk_conditional, risk_perm_invariant, risk_population,
    CandidateSet, DataLaw, Dataset, EstimatedModel, FitOptions, NextStateMode, PositionScheme,
    Selection, DEFAULT_RIDGE,
};
use gmfg_sim::{rollout, RequestKind, SimRequest};

use crate::config::{ExperimentConfig, GraphonSpec};
use crate::error::{BenchError, Result};
use crate::ne::{find_ne_fixed_point, NeOptions};
use crate::runner::run_experiment;

#[derive(Debug, Parser)]
#[command(
    name = "gmfg",
    about = "Learning in graphon mean-field games from simulated agents"
)]
struct Cli {
    /// Root random seed (replaces the seed list of `run`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output location: a directory for `run`, a file otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run { config: PathBuf },
    /// Solve for the reference equilibrium and print its exploitability.
    Ne(NeArgs),
    /// Fit an estimated model to a dataset file.
    Fit(FitArgs),
    /// Simulate sampled agents under the uniform policy and emit a dataset.
    Simulate(SimulateArgs),
    /// Evaluate the risks of a saved estimated model against the true game.
    Risk(RiskArgs),
}

#[derive(Debug, Args)]
struct GameArgs {
    /// True graphon, e.g. `exp:3`, `constant:0.5`, `sbm:2:0.9:0.3`.
    #[arg(long, default_value = "exp:3")]
    graphon: GraphonSpec,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
}

impl GameArgs {
    fn sis(&self) -> SisParams {
        SisParams {
            horizon: self.horizon,
            ..SisParams::default()
        }
    }
}

#[derive(Debug, Args)]
struct NeArgs {
    /// Take the game, grid, regularization and solver settings from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 16)]
    cells: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.2)]
    damping: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    dataset: PathBuf,
    /// Candidate graphon; repeat for several.
    #[arg(long = "candidate", default_values = ["exp:3", "constant:0.5"])]
    candidates: Vec<GraphonSpec>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    /// `per_step`, `shared` or `stationary`.
    #[arg(long, default_value = "per_step")]
    selection: String,
    /// Regress the numeric next state instead of indicators.
    #[arg(long)]
    scalar: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, default_value_t = 7)]
    agents: usize,
    #[arg(long, default_value_t = 125)]
    episodes: usize,
    #[arg(long, default_value_t = 16)]
    cells: usize,
    /// Hide which grid slot each agent occupies.
    #[arg(long)]
    unknown_positions: bool,
}

#[derive(Debug, Args)]
struct RiskArgs {
    model: PathBuf,
    #[arg(long, default_value = "exp:3")]
    graphon: GraphonSpec,
    /// Grid of the uniform behavior policy.
    #[arg(long, default_value_t = 16)]
    cells: usize,
    /// Quadrature nodes of the population risk.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
}

fn parse_selection(s: &str) -> Result<Selection> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        BenchError::config(
            "selection",
            format!("expected per_step, shared or stationary, got `{s}`"),
        )
    })
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(BenchError::config("threads", "must be at least 1"));
        }
        // A pool may already exist when called repeatedly in one process; keep it.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seeds = vec![seed];
            }
            if let Some(dir) = out {
                cfg.output = Some(dir.to_path_buf());
            }
            let res = run_experiment(&cfg)?;
            if let Some(r) = &res.reference {
                writeln!(
                    stdout,
                    "reference: {} iterations, exploitability {:e}",
                    r.iterations, r.exploitability
                )?;
            }
            if let Some((t, med, lo, hi)) = res.aggregate.last() {
                writeln!(
                    stdout,
                    "iteration {t}: median exploitability {med:.6} [{lo:.6}, {hi:.6}]"
                )?;
            }
            for f in &res.files {
                writeln!(stdout, "wrote {}", f.display())?;
            }
        }
        Command::Ne(a) => {
            let (model, lambda, cells, opts) = match &a.config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(path)?;
                    let r = cfg.reference;
                    let opts = NeOptions {
                        tol: r.tol,
                        max_iter: r.max_iter,
                        damping: r.damping,
                    };
                    (cfg.model.build()?, cfg.schedules.lambda, cfg.cells, opts)
                }
                None => {
                    let model = sis_model(&a.game.sis(), a.game.graphon.build()?)
                        .map_err(|e| BenchError::config("horizon", e.to_string()))?;
                    (
                        model,
                        a.lambda,
                        a.cells,
                        NeOptions {
                            tol: a.tol,
                            max_iter: a.max_iter,
                            damping: a.damping,
                        },
                    )
                }
            };
            let eq = find_ne_fixed_point(&model, lambda, cells, &opts)?;
            writeln!(stdout, "iterations {}", eq.iterations)?;
            writeln!(stdout, "exploitability {:e}", eq.exploitability)?;
            writeln!(stdout, "residual {:e}", eq.residual)?;
            if let Some(path) = out {
                let doc = serde_json::json!({
                    "iterations": eq.iterations,
                    "exploitability": eq.exploitability,
                    "policy": eq.policy,
                    "flow": eq.flow,
                });
                std::fs::write(path, serde_json::to_string(&doc)?)?;
            }
        }
        Command::Fit(a) => {
            let data = Dataset::from_json(&std::fs::read_to_string(&a.dataset)?)?;
            let graphons = a
                .candidates
                .iter()
                .map(GraphonSpec::build)
                .collect::<Result<Vec<_>>>()?;
            let cands = CandidateSet::new(graphons).with_ridge(a.ridge);
            let opts = FitOptions {
                mode: if a.scalar {
                    NextStateMode::Scalar
                } else {
                    NextStateMode::Indicator
                },
                selection: parse_selection(&a.selection)?,
                ..FitOptions::default()
            };
            let est = if data.scheme().is_known() {
                fit_with(&data, &cands, &opts)?
            } else {
                fit_unknown_with(&data, &cands, &opts)?
            };
            for (h, step) in est.steps.iter().enumerate() {
                let perm = step
                    .perm
                    .as_ref()
                    .map(|p| format!(" slots {p:?}"))
                    .unwrap_or_default();
                writeln!(
                    stdout,
                    "step {h}: candidate {} loss {:.6}{perm}",
                    step.candidate, step.loss
                )?;
            }
            if let Some(path) = out {
                std::fs::write(path, est.to_json()?)?;
            }
        }
        Command::Simulate(a) => {
            let model = sis_model(&a.game.sis(), a.game.graphon.build()?)
                .map_err(|e| BenchError::config("horizon", e.to_string()))?;
            let scheme = if a.unknown_positions {
                PositionScheme::UnknownGrid { n: a.agents }
            } else {
                PositionScheme::KnownGrid { n: a.agents }
            };
            let policy = PolicyProfile::uniform(
                a.cells,
                model.horizon(),
                model.n_states(),
                model.n_actions(),
            );
            let req = SimRequest::new(
                RequestKind::SelfInduced,
                policy,
                scheme,
                a.episodes,
                cli.seed.unwrap_or(0),
            )
            .with_policy_id("uniform");
            let r = rollout(&req, &model)?;
            emit(out, &r.dataset.to_json()?, stdout)?;
        }
        Command::Risk(a) => {
            let est = Arc::new(EstimatedModel::from_json(&std::fs::read_to_string(
                &a.model,
            )?)?);
            let params = SisParams {
                horizon: est.horizon,
                ..SisParams::default()
            };
            let truth = sis_model(&params, a.graphon.build()?)
                .map_err(|e| BenchError::config("model", e.to_string()))?;
            let behavior = [PolicyProfile::uniform(
                a.cells,
                truth.horizon(),
                truth.n_states(),
                truth.n_actions(),
            )];
            let law = DataLaw::self_induced(&truth, &behavior);
            let (mut cond_total, mut pop_total) = (0.0, 0.0);
            writeln!(stdout, "step,conditional,population")?;
            for h in 0..est.horizon {
                let g = est.graphon(h);
                let c = risk_conditional(est.as_ref(), g, &law, &est.scheme, h)?;
                let p = risk_population(est.as_ref(), g, &law, a.nodes, h)?;
                cond_total += c;
                pop_total += p;
                writeln!(stdout, "{h},{c},{p}")?;
            }
            writeln!(stdout, "total,{cond_total},{pop_total}")?;
            if !est.scheme.is_known() {
                let mut inv = 0.0;
                for h in 0..est.horizon {
                    inv +=
                        risk_perm_invariant(est.as_ref(), est.graphon(h), &law, &est.scheme, h)?.0;
                }
                writeln!(stdout, "permutation-invariant total,{inv}")?;
            }
        }
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code:
/// 0 on success, 1 on bad usage or configuration, 2 when the equilibrium solve does not converge.
pub fn cli<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(parsed, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
