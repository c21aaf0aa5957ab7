//! Runs the learning loop for every seed of an experiment and writes the metrics.

use std::io::Write;
use std::path::{Path, PathBuf};

use gmfg_core::{
    distance_flow, distance_policy, exploitability, GmfgModel, Graphon, PolicyProfile,
};
use gmfg_ppo::{run_gmfg_ppo, ExactOracle, Metrics, Oracle, RunOptions};
use gmfg_sim::{EmpiricalOracle, EstimationOracle};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, OracleSpec};
use crate::error::{BenchError, Result};
use crate::ne::{find_ne_fixed_point, Equilibrium, NeOptions};

pub const SEED_HEADER: [&str; 5] = ["iteration", "exploitability", "D", "d", "wall_clock"];
pub const AGGREGATE_HEADER: [&str; 4] = ["iter", "median_expl", "q25_expl", "q75_expl"];

/// Metrics of the iterate `pi_t`. `D` and `d` are distances of the running
/// averages of policies and flows to the reference equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub iteration: usize,
    pub exploitability: f64,
    pub policy_dist: Option<f64>,
    pub flow_dist: Option<f64>,
    pub wall_clock: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<Row>,
    pub final_policy: PolicyProfile<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<SeedRun>,
    /// `(iteration, median, q25, q75)` of the exploitability across seeds.
    pub aggregate: Vec<(usize, f64, f64, f64)>,
    pub reference: Option<Equilibrium>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutput {
    pub fn final_median(&self) -> f64 {
        self.aggregate.last().map_or(f64::NAN, |r| r.1)
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn oracle_for(cfg: &ExperimentConfig, model: &GmfgModel<f64>) -> Result<Box<dyn Oracle<f64>>> {
    let lambda = cfg.schedules.lambda;
    let m = cfg.cells;
    Ok(match &cfg.oracle {
        OracleSpec::Exact => Box::new(ExactOracle::new(model.clone(), lambda, m)),
        OracleSpec::ConstantGraphon { p } => {
            let believed = model.with_graphon(Graphon::constant(*p)?)?;
            Box::new(ExactOracle::new(believed, lambda, m))
        }
        OracleSpec::Algorithm2 { .. } => {
            let oc = cfg.oracle_config()?.expect("algorithm2 arm");
            Box::new(EstimationOracle::new(model.clone(), oc, m)?)
        }
        OracleSpec::Empirical { agents, episodes } => Box::new(EmpiricalOracle::new(
            model.clone(),
            *agents,
            *episodes,
            lambda,
            m,
        )?),
    })
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// One seed of `cfg`; `reference` supplies the distance columns.
pub fn run_seed(
    cfg: &ExperimentConfig,
    model: &GmfgModel<f64>,
    reference: Option<&Equilibrium>,
    seed: u64,
) -> Result<SeedRun> {
    let mut boxed = oracle_for(cfg, model)?;
    let mut oracle: &mut dyn Oracle<f64> = boxed.as_mut();
    let lambda = cfg.schedules.lambda;
    if cfg.schedules.iterations == 0 {
        // No update happens: report the uniform starting policy and the first averaged flow.
        let start = std::time::Instant::now();
        oracle
            .begin(seed)
            .map_err(|e| BenchError::config("oracle", e.to_string()))?;
        let (m, h, s, a) = oracle.policy_shape();
        let pi = PolicyProfile::uniform(m, h, s, a);
        let bar = oracle
            .estimate_flow(0, &pi)
            .map_err(|e| BenchError::config("oracle", e.to_string()))?;
        let (d_pi, d_mu) = match reference {
            Some(r) => (
                Some(distance_policy(&pi, &r.policy, &r.flow)?),
                Some(distance_flow(&bar, &r.flow)?),
            ),
            None => (None, None),
        };
        let row = Row {
            iteration: 1,
            exploitability: exploitability(&pi, model, lambda)?,
            policy_dist: d_pi,
            flow_dist: d_mu,
            wall_clock: start.elapsed().as_secs_f64(),
        };
        return Ok(SeedRun {
            seed,
            rows: vec![row],
            final_policy: pi,
        });
    }
    let metrics = Metrics {
        model,
        reference: reference.map(|r| (&r.policy, &r.flow)),
    };
    let hist = run_gmfg_ppo(
        &mut oracle,
        Some(metrics),
        &cfg.schedules,
        seed,
        RunOptions::default(),
    )?;
    let rows = (0..hist.len())
        .map(|k| Row {
            iteration: k + 1,
            exploitability: hist.exploitability[k],
            policy_dist: opt(hist.avg_policy_dist[k]),
            flow_dist: opt(hist.avg_flow_dist[k]),
            wall_clock: hist.wall_clock[k],
        })
        .collect();
    Ok(SeedRun {
        seed,
        rows,
        final_policy: hist.final_policy,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_seed_csv<W: Write>(out: W, run: &SeedRun, wall_clock: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEED_HEADER)?;
    for r in &run.rows {
        w.write_record([
            r.iteration.to_string(),
            r.exploitability.to_string(),
            cell(r.policy_dist),
            cell(r.flow_dist),
            cell(wall_clock.then_some(r.wall_clock)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(out: W, aggregate: &[(usize, f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for (t, med, lo, hi) in aggregate {
        w.write_record([
            t.to_string(),
            med.to_string(),
            lo.to_string(),
            hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn aggregate(runs: &[SeedRun]) -> Vec<(usize, f64, f64, f64)> {
    let len = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let v: Vec<f64> = runs.iter().map(|r| r.rows[k].exploitability).collect();
            (
                runs[0].rows[k].iteration,
                quantile(&v, 0.5),
                quantile(&v, 0.25),
                quantile(&v, 0.75),
            )
        })
        .collect()
}

/// Reference equilibrium of the true game, when enabled in `cfg`.
pub fn reference_for(
    cfg: &ExperimentConfig,
    model: &GmfgModel<f64>,
) -> Result<Option<Equilibrium>> {
    if !cfg.reference.enabled {
        return Ok(None);
    }
    let opts = NeOptions {
        tol: cfg.reference.tol,
        max_iter: cfg.reference.max_iter,
        damping: cfg.reference.damping,
    };
    find_ne_fixed_point(model, cfg.schedules.lambda, cfg.cells, &opts).map(Some)
}

fn file_stem(cfg: &ExperimentConfig) -> &str {
    if cfg.name.is_empty() {
        "experiment"
    } else {
        &cfg.name
    }
}

/// Runs every seed (in parallel) and writes `<name>_seed<k>.csv` per seed and
/// `<name>_aggregate.csv` into `cfg.output` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let reference = reference_for(cfg, &model)?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &model, reference.as_ref(), seed))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&runs);
    let mut files = Vec::new();
    if let Some(dir) = &cfg.output {
        files = write_outputs(dir, file_stem(cfg), &runs, &aggregate, cfg.wall_clock)?;
    }
    Ok(ExperimentOutput {
        runs,
        aggregate,
        reference,
        files,
    })
}

fn write_outputs(
    dir: &Path,
    stem: &str,
    runs: &[SeedRun],
    aggregate: &[(usize, f64, f64, f64)],
    wall_clock: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for run in runs {
        let path = dir.join(format!("{stem}_seed{}.csv", run.seed));
        write_seed_csv(std::fs::File::create(&path)?, run, wall_clock)?;
        files.push(path);
    }
    let path = dir.join(format!("{stem}_aggregate.csv"));
    write_aggregate_csv(std::fs::File::create(&path)?, aggregate)?;
    files.push(path);
    Ok(files)
}
