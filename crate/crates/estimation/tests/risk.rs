mod common;

use std::sync::Arc;

use gmfg_core::{FnDynamics, GmfgModel, Graphon, PolicyProfile, StateActionSpace};
use gmfg_estimation::{
    fit, risk_conditional, risk_conditional_total, risk_perm_invariant, risk_population,
    CandidateSet, DataLaw, Embedding, EstimationError, NextStateMode, PositionScheme, Prediction,
    Predictor, TruePredictor,
};

use common::{sample_grid, sis};

/// Next state equals the action; reward `s + a z(1)`.
fn deterministic(graphon: Graphon<f64>, horizon: usize) -> GmfgModel<f64> {
    let space = StateActionSpace::new(vec![0.0, 1.0], vec!["a0".into(), "a1".into()]).unwrap();
    let dynamics = FnDynamics {
        transition: |_h: usize, _s: usize, a: usize, _z: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|p| *p = 0.0);
            out[a] = 1.0;
        },
        reward: |_h: usize, s: usize, a: usize, z: &[f64]| s as f64 + a as f64 * z[1],
    };
    GmfgModel::new(
        space,
        horizon,
        vec![0.5, 0.5],
        Arc::new(dynamics),
        vec![graphon],
    )
    .unwrap()
}

struct Shifted<'a>(TruePredictor<'a>, f64);

impl Predictor for Shifted<'_> {
    fn mode(&self) -> NextStateMode {
        self.0.mode()
    }
    fn predict(&self, h: usize, x: &Embedding) -> Prediction {
        let mut p = self.0.predict(h, x);
        p.reward += self.1;
        p
    }
}

struct Zero;

impl Predictor for Zero {
    fn mode(&self) -> NextStateMode {
        NextStateMode::Indicator
    }
    fn predict(&self, _h: usize, _x: &Embedding) -> Prediction {
        Prediction {
            next: None,
            reward: 0.0,
        }
    }
}

#[test]
fn truth_has_zero_risk_on_deterministic_games() {
    let w = Graphon::exp(3.0).unwrap();
    let model = deterministic(w.clone(), 3);
    let behavior = [PolicyProfile::uniform(4, 3, 2, 2)];
    let law = DataLaw::self_induced(&model, &behavior);
    let truth = TruePredictor {
        model: &model,
        mode: NextStateMode::Indicator,
    };
    let scheme = PositionScheme::KnownGrid { n: 5 };
    for h in 0..3 {
        assert!(
            risk_conditional(&truth, &w, &law, &scheme, h)
                .unwrap()
                .abs()
                < 1e-15
        );
        let c = 0.3;
        let shifted = risk_conditional(
            &Shifted(
                TruePredictor {
                    model: &model,
                    mode: NextStateMode::Indicator,
                },
                c,
            ),
            &w,
            &law,
            &scheme,
            h,
        )
        .unwrap();
        assert!((shifted - c * c).abs() < 1e-14);
    }
    let scalar = TruePredictor {
        model: &model,
        mode: NextStateMode::Scalar,
    };
    assert!(
        risk_conditional_total(&scalar, &[w], &law, &scheme)
            .unwrap()
            .abs()
            < 1e-14
    );
}

#[test]
fn two_cell_hand_value() {
    // Cell 0 always plays a0, cell 1 always a1; z = (1/2, 1/2) under W = 1, so the
    // zero predictor pays E[s^2] = 1/2 in cell 0 and E[(s + 1/2)^2] = 5/4 in cell 1.
    let w = Graphon::constant(1.0).unwrap();
    let model = deterministic(w.clone(), 1);
    let mut pi = PolicyProfile::uniform(2, 1, 2, 2);
    for s in 0..2 {
        pi.row_mut(0, 0, s).copy_from_slice(&[1.0, 0.0]);
        pi.row_mut(1, 0, s).copy_from_slice(&[0.0, 1.0]);
    }
    let behavior = [pi];
    let law = DataLaw::self_induced(&model, &behavior);
    let r = risk_conditional(&Zero, &w, &law, &PositionScheme::KnownGrid { n: 2 }, 0).unwrap();
    assert!((r - 0.875).abs() < 1e-15);
}

#[test]
fn population_risk_matches_conditional_on_the_grid() {
    let w = Graphon::exp(3.0).unwrap();
    let model = sis(w.clone(), 3);
    let behavior = [PolicyProfile::uniform(8, 3, 2, 2)];
    let law = DataLaw::self_induced(&model, &behavior);
    let pred = Shifted(
        TruePredictor {
            model: &model,
            mode: NextStateMode::Indicator,
        },
        0.1,
    );
    let other = Graphon::constant(0.5).unwrap();
    for n in [2, 3, 7] {
        let pop = risk_population(&pred, &other, &law, n, 1).unwrap();
        let cond =
            risk_conditional(&pred, &other, &law, &PositionScheme::KnownGrid { n }, 1).unwrap();
        assert!((pop - cond).abs() < 1e-15);
    }
    assert!(risk_population(&pred, &other, &law, 0, 1).is_err());
}

#[test]
fn permutation_invariant_risk_undoes_a_swap() {
    let w = Graphon::step(vec![
        vec![0.9, 0.1, 0.2, 0.3],
        vec![0.1, 0.8, 0.4, 0.5],
        vec![0.2, 0.4, 0.7, 0.6],
        vec![0.3, 0.5, 0.6, 0.05],
    ])
    .unwrap();
    let model = sis(w.clone(), 3);
    let behavior = [PolicyProfile::uniform(4, 3, 2, 2)];
    let law = DataLaw::self_induced(&model, &behavior);
    let truth = TruePredictor {
        model: &model,
        mode: NextStateMode::Indicator,
    };
    let scheme = PositionScheme::UnknownGrid { n: 4 };
    let wrong = w.permuted(&[1, 0, 2, 3]).unwrap();
    for h in 0..3 {
        let aligned = risk_conditional(&truth, &w, &law, &scheme, h).unwrap();
        let misaligned = risk_conditional(&truth, &wrong, &law, &scheme, h).unwrap();
        // Rewards ignore z, so only steps with a next state can tell the graphons apart.
        if h < 2 {
            assert!(
                misaligned > aligned + 1e-6,
                "step {h}: {misaligned} vs {aligned}"
            );
        }
        let (best, phi) = risk_perm_invariant(&truth, &wrong, &law, &scheme, h).unwrap();
        assert!((best - aligned).abs() < 1e-10);
        if h < 2 {
            let undone = wrong.permuted(&phi).unwrap();
            let grid = scheme.positions();
            for &x in &grid {
                for &y in &grid {
                    assert!((undone.eval(x, y) - w.eval(x, y)).abs() < 1e-15);
                }
            }
        }
        // The identity is among the candidates, so the minimum never exceeds the plain risk.
        let (plain, _) = risk_perm_invariant(&truth, &w, &law, &scheme, h).unwrap();
        assert!(plain <= aligned + 1e-15);
    }
    assert!(matches!(
        risk_perm_invariant(&truth, &w, &law, &PositionScheme::KnownGrid { n: 4 }, 0),
        Err(EstimationError::Scheme(_))
    ));
    assert!(matches!(
        risk_perm_invariant(&truth, &w, &law, &PositionScheme::UnknownGrid { n: 9 }, 0),
        Err(EstimationError::TooManyAgents { .. })
    ));
}

#[test]
fn excess_risk_of_fitted_models_is_nonnegative() {
    let w = Graphon::exp(3.0).unwrap();
    let model = sis(w.clone(), 3);
    let policy = PolicyProfile::uniform(8, 3, 2, 2);
    let behavior = [policy.clone()];
    let law = DataLaw::self_induced(&model, &behavior);
    let truth = TruePredictor {
        model: &model,
        mode: NextStateMode::Indicator,
    };
    let scheme = PositionScheme::KnownGrid { n: 4 };
    let cands = CandidateSet::new(vec![
        w.clone(),
        Graphon::constant(0.5).unwrap(),
        Graphon::constant(0.0).unwrap(),
    ]);
    for seed in 0..6 {
        let data = sample_grid(&model, &policy, 4, 15, seed);
        let est = fit(&data, &cands).unwrap();
        for h in 0..3 {
            let r_hat = risk_conditional(&est, est.graphon(h), &law, &scheme, h).unwrap();
            let r_star = risk_conditional(&truth, &w, &law, &scheme, h).unwrap();
            assert!(
                r_hat - r_star >= -1e-12,
                "seed {seed} step {h}: {r_hat} < {r_star}"
            );
        }
    }
}

#[test]
fn frozen_flow_law_differs_from_self_induced() {
    let w = Graphon::exp(3.0).unwrap();
    let model = sis(w.clone(), 3);
    let behavior = [PolicyProfile::uniform(4, 3, 2, 2)];
    let frozen = gmfg_core::DistributionFlow::replicate(&[0.0, 1.0], 4, 3);
    let pred = Zero;
    let free = risk_conditional(
        &pred,
        &w,
        &DataLaw::self_induced(&model, &behavior),
        &PositionScheme::KnownGrid { n: 3 },
        1,
    )
    .unwrap();
    let law = DataLaw {
        truth: &model,
        behavior: &behavior,
        frozen: Some(&frozen),
    };
    let fixed = risk_conditional(&pred, &w, &law, &PositionScheme::KnownGrid { n: 3 }, 1).unwrap();
    assert!((free - fixed).abs() > 1e-6);
    let empty: [PolicyProfile<f64>; 0] = [];
    assert!(risk_conditional(
        &pred,
        &w,
        &DataLaw::self_induced(&model, &empty),
        &PositionScheme::KnownGrid { n: 3 },
        0
    )
    .is_err());
}
