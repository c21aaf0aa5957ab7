//! Acceptance run: every criterion prints one PASS/FAIL line; the process fails
//! if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use gmfg_bench::{reference_for, run_experiment, run_seed, ExperimentConfig, ExperimentOutput};
use gmfg_core::permute::permutations;
use gmfg_core::sis::{rescale_rewards, sis_model, sis_reward_range, SisParams};
use gmfg_core::{
    aggregate_table, distance_flow, evaluate_policy_all, gamma2, soft_optimal_policy, FnDynamics,
    GmfgModel, Graphon, PolicyProfile, StateActionSpace,
};
use gmfg_estimation::{
    empirical_aggregate, fit_unknown_with, fit_with, grid_position, risk_conditional,
    risk_conditional_total, risk_perm_invariant, CandidateSet, DataLaw, Dataset, Episode,
    FitOptions, NextStateMode, Pooling, PositionScheme, Selection, Transition, TruePredictor,
};
use gmfg_ppo::{mirror_descent_step, proximal_objective};
use gmfg_sim::{rollout, RequestKind, SimRequest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sis(graphon: Graphon<f64>, horizon: usize) -> GmfgModel<f64> {
    sis_model(
        &SisParams {
            horizon,
            ..SisParams::default()
        },
        graphon,
    )
    .unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn random_policy(rng: &mut ChaCha8Rng, cells: usize, horizon: usize) -> PolicyProfile<f64> {
    let data = (0..cells * horizon * 2)
        .flat_map(|_| random_simplex(rng, 2))
        .collect();
    PolicyProfile::from_vec(cells, horizon, 2, 2, data).unwrap()
}

fn random_graphon(rng: &mut ChaCha8Rng) -> Graphon<f64> {
    match rng.gen_range(0..3) {
        0 => Graphon::exp(rng.gen_range(0.1..8.0)).unwrap(),
        1 => Graphon::sbm(rng.gen_range(1..5), rng.gen(), rng.gen()).unwrap(),
        _ => {
            let k = rng.gen_range(2..6);
            let mut v = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in i..k {
                    let x: f64 = rng.gen();
                    v[i][j] = x;
                    v[j][i] = x;
                }
            }
            Graphon::step(v).unwrap()
        }
    }
}

/// Relabeling the grid cells commutes with propagation.
fn equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = sis(Graphon::constant(0.5).unwrap(), 50);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pi = random_policy(&mut rng, 16, 50);
        let w = random_graphon(&mut rng);
        let mut phi: Vec<usize> = (0..16).collect();
        phi.shuffle(&mut rng);
        let base = gamma2(&pi, &model.with_graphon(w.clone()).unwrap()).unwrap();
        let moved_game = model.with_graphon(w.permuted(&phi).unwrap()).unwrap();
        let moved = gamma2(&pi.permuted(&phi).unwrap(), &moved_game).unwrap();
        worst = worst.max(distance_flow(&moved, &base.permuted(&phi).unwrap()).unwrap());
    }
    check(
        worst < 1e-10,
        format!("max d over 50 triples = {worst:.2e}"),
    )
}

/// The closed-form update attains the proximal objective's maximum over a 1e-3 simplex grid.
fn mirror_step() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_arg = 0.0f64;
    for _ in 0..100 {
        let p0 = rng.gen_range(0.01..0.99);
        let pi = [p0, 1.0 - p0];
        let q = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
        let eta = rng.gen_range(0.01..5.0);
        let lambda = rng.gen_range(0.01..5.0);
        let p = mirror_descent_step(&pi, &q, eta, lambda).unwrap();
        let attained = proximal_objective(&p, &pi, &q, eta, lambda);
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let v = proximal_objective(&[x, 1.0 - x], &pi, &q, eta, lambda);
            if v > best {
                best = v;
                arg = x;
            }
        }
        worst_gap = worst_gap.max(best - attained);
        worst_arg = worst_arg.max((arg - p[0]).abs());
    }
    check(
        worst_gap <= 1e-12 && worst_arg <= 1e-3 + 1e-12,
        format!("grid best minus closed form <= {worst_gap:.2e}, argmax offset <= {worst_arg:.2e}"),
    )
}

/// Soft-optimal policies on rewards in [0, 1] keep every action above the floor.
fn soft_dp_floor() -> Outcome {
    let params = SisParams::default();
    let (lo, hi) = sis_reward_range(&params);
    let model = rescale_rewards(
        &sis_model(&params, Graphon::exp(3.0).unwrap()).unwrap(),
        lo,
        hi,
    );
    let hz = model.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for lambda in [0.1, 0.5, 1.0, 2.0, 10.0] {
        for k in 0..4 {
            let pi = if k == 0 {
                PolicyProfile::uniform(16, hz, 2, 2)
            } else {
                random_policy(&mut rng, 16, hz)
            };
            let flow = gamma2(&pi, &model).unwrap();
            let (best, _) = soft_optimal_policy(&flow, &model, lambda).unwrap();
            for i in 0..16 {
                for h in 0..hz {
                    let remaining = (hz - h) as f64;
                    let bound =
                        1.0 / (1.0 + 2.0 * (remaining * (1.0 + lambda * 2f64.ln()) / lambda).exp());
                    for s in 0..2 {
                        for &p in best.row(i, h, s) {
                            checked += 1;
                            if p < bound - 1e-12 {
                                violations += 1;
                            }
                            tightest = tightest.min(p / bound);
                        }
                    }
                }
            }
        }
    }
    check(
        violations == 0,
        format!(
            "{violations} of {checked} entries below the floor; min ratio to floor {tightest:.3}"
        ),
    )
}

fn draw(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.len() - 1
}

/// Backward-recursion values against the mean regularized return of simulated episodes.
fn dp_vs_monte_carlo() -> Outcome {
    const CELLS: usize = 8;
    const EPISODES: usize = 100_000;
    let lambda = 1.0;
    let model = sis(Graphon::exp(3.0).unwrap(), 10);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pi = random_policy(&mut rng, CELLS, 10);
    let flow = gamma2(&pi, &model).unwrap();
    let tables = evaluate_policy_all(&pi, &flow, &model, lambda).unwrap();
    let exact: f64 = tables
        .iter()
        .map(|(_, v)| {
            model
                .initial()
                .iter()
                .enumerate()
                .map(|(s, &p)| p * v.get(0, s))
                .sum::<f64>()
        })
        .sum::<f64>()
        / CELLS as f64;
    let aggs = aggregate_table(&model, &flow);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for ep in 0..EPISODES {
        let cell = ep % CELLS;
        let mut s = draw(model.initial(), rng.gen());
        let mut ret = 0.0;
        for h in 0..10 {
            let z = &aggs[cell][h];
            let row = pi.row(cell, h, s);
            let a = draw(row, rng.gen());
            ret += model.reward(h, s, a, z) - lambda * row[a].ln();
            s = draw(&model.transition(h, s, a, z), rng.gen());
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = EPISODES as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / (n - 1.0)).sqrt();
    let z = (mean - exact).abs() / se;
    check(
        z < 3.0,
        format!("DP {exact:.5}, MC {mean:.5} +- {se:.5} ({z:.2} standard errors)"),
    )
}

fn experiment(name: &str, oracle: serde_json::Value, seeds: &[u64]) -> ExperimentConfig {
    ExperimentConfig::from_json(
        &serde_json::json!({
            "name": name,
            "model": {"graphon": {"family": "exp", "theta": 3.0}},
            "cells": 16,
            "schedules": {"iterations": 200, "lambda": 1.0},
            "oracle": oracle,
            "seeds": seeds,
        })
        .to_string(),
    )
    .unwrap()
}

/// Exploitability drops and the averaged distance to the reference settles.
fn ppo_trend() -> Outcome {
    let cfg = experiment("exact", serde_json::json!({"kind": "exact"}), &[0]);
    let model = cfg.model.build().unwrap();
    let reference = reference_for(&cfg, &model).unwrap();
    let run = run_seed(&cfg, &model, reference.as_ref(), 0).unwrap();
    let first = run.rows[0].exploitability;
    let last = run.rows[199].exploitability;
    let metric: Vec<f64> = run
        .rows
        .iter()
        .map(|r| r.policy_dist.unwrap() + r.flow_dist.unwrap())
        .collect();
    let worst = (150..200)
        .map(|t| metric[t] / metric[t - 1])
        .fold(0.0f64, f64::max);
    check(
        last < 0.25 * first && worst <= 1.05,
        format!(
            "exploitability {first:.4} -> {last:.4} (ratio {:.2e}); D+d {:.4} -> {:.4}, max step ratio over last 50 {worst:.4}",
            last / first,
            metric[149],
            metric[199]
        ),
    )
}

/// Selection of the true graphon and shrinking excess risk with more agents and episodes.
fn graphon_recovery() -> Outcome {
    let truth = Graphon::exp(3.0).unwrap();
    let model = sis(truth.clone(), 50);
    let cands = CandidateSet::new(vec![
        truth.clone(),
        Graphon::exp(1.0).unwrap(),
        Graphon::constant(0.5).unwrap(),
        Graphon::sbm(2, 0.9, 0.3).unwrap(),
    ]);
    let pi = PolicyProfile::uniform(16, 50, 2, 2);
    let behavior = [pi.clone()];
    let law = DataLaw::self_induced(&model, &behavior);
    let opts = FitOptions {
        selection: Selection::Shared,
        ..FitOptions::default()
    };
    let oracle = TruePredictor {
        model: &model,
        mode: NextStateMode::Indicator,
    };
    let (mut selected, mut ordered) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let mut excess = Vec::new();
        for (n, l) in [(4, 125), (7, 500)] {
            let scheme = PositionScheme::KnownGrid { n };
            let req = SimRequest::new(
                RequestKind::SelfInduced,
                pi.clone(),
                scheme.clone(),
                l,
                seed,
            );
            let data = rollout(&req, &model).unwrap().dataset;
            let est = fit_with(&data, &cands, &opts).unwrap();
            if n == 7 && est.steps.iter().all(|s| s.candidate == 0) {
                selected += 1;
            }
            let graphons: Vec<Graphon<f64>> = (0..50).map(|h| est.graphon(h).clone()).collect();
            let r_est = risk_conditional_total(&est, &graphons, &law, &scheme).unwrap();
            let r_true =
                risk_conditional_total(&oracle, std::slice::from_ref(&truth), &law, &scheme)
                    .unwrap();
            excess.push(r_est - r_true);
        }
        if excess[1] <= excess[0] {
            ordered += 1;
        }
        lines.push(format!("{:.4}/{:.4}", excess[0], excess[1]));
    }
    check(
        selected >= 9 && ordered >= 8,
        format!(
            "truth selected in {selected}/10 seeds; excess risk (N=7,L=500) <= (N=4,L=125) in {ordered}/10 [{}]",
            lines.join(" ")
        ),
    )
}

fn asymmetric_step() -> Graphon<f64> {
    Graphon::step(vec![
        vec![0.9, 0.1, 0.2, 0.3],
        vec![0.1, 0.8, 0.4, 0.5],
        vec![0.2, 0.4, 0.7, 0.6],
        vec![0.3, 0.5, 0.6, 0.05],
    ])
    .unwrap()
}

type Rows = Vec<Vec<Vec<(usize, usize, f64)>>>;

/// Agent `i` sits at grid slot `slots[i]`; states are redrawn each episode and kept for
/// both steps; rewards are `1 - 2 z(1) + a / 4` with `z` the realized peer aggregate.
fn constructed_rows(w: &Graphon<f64>, slots: &[usize], episodes: usize, seed: u64) -> Rows {
    let n = slots.len();
    let grid = PositionScheme::KnownGrid { n }.positions();
    let pos: Vec<f64> = slots.iter().map(|&k| grid[k]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes)
        .map(|_| {
            let states: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            (0..n)
                .map(|i| {
                    let z = empirical_aggregate(w, &pos, &states, 2, i).unwrap();
                    (0..2)
                        .map(|_| {
                            let a = rng.gen_range(0..2);
                            (states[i], a, 1.0 - 2.0 * z[1] + 0.25 * a as f64)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn toy_space() -> StateActionSpace<f64> {
    StateActionSpace::new(vec![0.0, 1.0], vec!["a0".into(), "a1".into()]).unwrap()
}

fn dataset(scheme: PositionScheme, rows: &Rows) -> Dataset {
    let n = scheme.n();
    let eps = rows
        .iter()
        .map(|ep| {
            let mut rec = Vec::new();
            for agent in ep {
                for h in 0..2 {
                    let (s, a, r) = agent[h];
                    rec.push(Transition {
                        s,
                        a,
                        r,
                        s_next: (h == 0).then(|| agent[1].0),
                    });
                }
            }
            Episode::new("pi", n, 2, rec).unwrap()
        })
        .collect();
    Dataset::new(toy_space(), 2, scheme, eps).unwrap()
}

/// Slot assignments under unknown positions, checked against exhaustive relabeling,
/// and the permutation-invariant risk against the aligned one.
fn unknown_positions() -> Outcome {
    let w = asymmetric_step();
    let cands = CandidateSet::new(vec![w.clone()]);
    let opts = FitOptions {
        pooling: Pooling::PerEpisode,
        ..FitOptions::default()
    };
    let all = permutations(4);
    // The game behind the constructed data: states redrawn uniformly, same rewards.
    let truth = GmfgModel::new(
        toy_space(),
        2,
        vec![0.5, 0.5],
        Arc::new(FnDynamics {
            transition: |_h: usize, _s: usize, _a: usize, _z: &[f64], out: &mut [f64]| {
                out.copy_from_slice(&[0.5, 0.5])
            },
            reward: |_h: usize, _s: usize, a: usize, z: &[f64]| 1.0 - 2.0 * z[1] + 0.25 * a as f64,
        }),
        vec![w.clone()],
    )
    .unwrap();
    let behavior = [PolicyProfile::uniform(4, 2, 2, 2)];
    let law = DataLaw::self_induced(&truth, &behavior);
    let oracle = TruePredictor {
        model: &truth,
        mode: NextStateMode::Indicator,
    };
    let scheme = PositionScheme::UnknownGrid { n: 4 };
    let (mut recovered, mut brute_agrees) = (0, 0);
    let mut risk_gap = 0.0f64;
    let mut mislabeled_worse = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut slots: Vec<usize> = (0..4).collect();
        slots.shuffle(&mut rng);
        let rows = constructed_rows(&w, &slots, 40, seed);
        let est = fit_unknown_with(&dataset(scheme.clone(), &rows), &cands, &opts).unwrap();
        let mut ok = true;
        let mut brute_ok = true;
        for h in 0..2 {
            let brute: Vec<f64> = all
                .iter()
                .map(|perm| {
                    let moved: Rows = rows
                        .iter()
                        .map(|ep| {
                            let mut by_slot = vec![Vec::new(); 4];
                            for (i, &k) in perm.iter().enumerate() {
                                by_slot[k] = ep[i].clone();
                            }
                            by_slot
                        })
                        .collect();
                    let known = dataset(PositionScheme::KnownGrid { n: 4 }, &moved);
                    fit_with(&known, &cands, &opts).unwrap().steps[h].loss
                })
                .collect();
            let best = brute.iter().copied().fold(f64::INFINITY, f64::min);
            let found = est.steps[h].perm.clone().unwrap();
            // Up to automorphism: any permutation leaving the graphon's block matrix unchanged.
            let at = |k: usize| grid_position(k, 4);
            let same_graphon = |p: &[usize]| {
                (0..4).all(|i| {
                    (0..4).all(|j| w.eval(at(p[i]), at(p[j])) == w.eval(at(slots[i]), at(slots[j])))
                })
            };
            ok &= same_graphon(&found);
            brute_ok &= all
                .iter()
                .zip(&brute)
                .filter(|(_, &l)| l <= best + 1e-10)
                .all(|(p, _)| same_graphon(p))
                && (est.steps[h].loss - best).abs() < 1e-10;
            // The graphon as the learner holds it in label coordinates.
            let labelled = w.permuted(&found).unwrap();
            let (inv, _) = risk_perm_invariant(&oracle, &labelled, &law, &scheme, h).unwrap();
            let aligned = risk_conditional(&oracle, &w, &law, &scheme, h).unwrap();
            risk_gap = risk_gap.max((inv - aligned).abs());
            if risk_conditional(&oracle, &labelled, &law, &scheme, h).unwrap() > aligned + 1e-6 {
                mislabeled_worse += 1;
            }
        }
        recovered += ok as usize;
        brute_agrees += brute_ok as usize;
    }
    check(
        recovered == 10 && brute_agrees == 10 && risk_gap < 1e-10,
        format!(
            "assignment recovered in {recovered}/10 seeds, brute force agrees in {brute_agrees}/10; \
             |invariant - aligned risk| <= {risk_gap:.2e} (label-order graphon strictly worse in {mislabeled_worse}/20 fits)"
        ),
    )
}

struct Arms {
    medians: Vec<(String, f64, Duration)>,
}

fn run_arms() -> Arms {
    let arms = [
        ("exact", serde_json::json!({"kind": "exact"})),
        (
            "alg2_L500",
            serde_json::json!({"kind": "algorithm2", "agents": 7, "episodes": 500}),
        ),
        (
            "alg2_L125",
            serde_json::json!({"kind": "algorithm2", "agents": 7, "episodes": 125}),
        ),
        (
            "const_0",
            serde_json::json!({"kind": "constant_graphon", "p": 0.0}),
        ),
        (
            "const_0.5",
            serde_json::json!({"kind": "constant_graphon", "p": 0.5}),
        ),
        (
            "const_1",
            serde_json::json!({"kind": "constant_graphon", "p": 1.0}),
        ),
    ];
    let medians = arms
        .into_iter()
        .map(|(name, oracle)| {
            let mut cfg = experiment(name, oracle, &[0, 1, 2, 3, 4]);
            cfg.reference.enabled = false;
            let start = Instant::now();
            let out: ExperimentOutput = run_experiment(&cfg).unwrap();
            (name.to_string(), out.final_median(), start.elapsed())
        })
        .collect();
    Arms { medians }
}

/// Learning the graphon beats assuming a constant one; more data helps.
fn end_to_end(arms: &Arms) -> Outcome {
    let m = |k: usize| arms.medians[k].1;
    let best_const = m(3).min(m(4)).min(m(5));
    let chain = [m(0), m(1), m(2), best_const];
    let ordered = chain.windows(2).all(|p| p[0] <= 1.1 * p[1]);
    let listing: Vec<String> = arms
        .medians
        .iter()
        .map(|(n, v, t)| format!("{n} {v:.4} ({:.1}s)", t.as_secs_f64()))
        .collect();
    check(
        ordered,
        format!("median final exploitability: {}", listing.join(", ")),
    )
}

fn repeated_files(name: &str, oracle: &serde_json::Value) -> bool {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let bodies: Vec<Vec<Vec<u8>>> = dirs
        .iter()
        .map(|dir| {
            let mut cfg = experiment(name, oracle.clone(), &[7]);
            cfg.output = Some(dir.path().to_path_buf());
            let out = run_experiment(&cfg).unwrap();
            out.files
                .iter()
                .map(|f| std::fs::read(f).unwrap())
                .collect()
        })
        .collect();
    bodies[0] == bodies[1]
}

/// The cheapest arm, repeated with a fixed seed, writes byte-identical CSV files;
/// so does the sampling-based arm with the smaller budget.
fn determinism(arms: &Arms) -> Outcome {
    let (name, _, _) = arms.medians.iter().min_by_key(|a| a.2).unwrap();
    let oracle = match name.as_str() {
        "exact" => serde_json::json!({"kind": "exact"}),
        "alg2_L500" => serde_json::json!({"kind": "algorithm2", "episodes": 500}),
        "alg2_L125" => serde_json::json!({"kind": "algorithm2", "episodes": 125}),
        other => {
            serde_json::json!({"kind": "constant_graphon", "p": other["const_".len()..].parse::<f64>().unwrap()})
        }
    };
    let cheapest = repeated_files(name, &oracle);
    let sampled = repeated_files(
        "alg2_L125",
        &serde_json::json!({"kind": "algorithm2", "episodes": 125}),
    );
    check(
        cheapest && sampled,
        format!("seed 7: cheapest arm {name} identical {cheapest}, alg2_L125 identical {sampled}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report =
        |id: usize, title: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
            let start = Instant::now();
            let out = f();
            let took = start.elapsed();
            let in_time = limit.is_none_or(|l| took <= l);
            let pass = out.pass && in_time;
            failed += (!pass) as usize;
            let budget = limit
                .map(|l| format!(", limit {}s", l.as_secs()))
                .unwrap_or_default();
            println!(
                "criterion {id} ({title}): {} | {} | {:.2}s{budget}",
                if pass { "PASS" } else { "FAIL" },
                out.detail,
                took.as_secs_f64()
            );
        };
    report(
        1,
        "equivariance",
        Some(Duration::from_secs(10)),
        &mut equivariance,
    );
    report(
        2,
        "mirror step optimality",
        Some(Duration::from_secs(5)),
        &mut mirror_step,
    );
    report(
        3,
        "soft-DP floor",
        Some(Duration::from_secs(1)),
        &mut soft_dp_floor,
    );
    report(
        4,
        "DP vs Monte Carlo",
        Some(Duration::from_secs(60)),
        &mut dp_vs_monte_carlo,
    );
    report(
        5,
        "convergence trend",
        Some(Duration::from_secs(600)),
        &mut ppo_trend,
    );
    report(
        6,
        "graphon recovery",
        Some(Duration::from_secs(600)),
        &mut graphon_recovery,
    );
    report(7, "unknown positions", None, &mut unknown_positions);
    let mut arms = None;
    report(
        8,
        "end-to-end ordering",
        Some(Duration::from_secs(1800)),
        &mut || {
            let a = run_arms();
            let out = end_to_end(&a);
            arms = Some(a);
            out
        },
    );
    let arms = arms.unwrap();
    report(9, "determinism", None, &mut || determinism(&arms));
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
