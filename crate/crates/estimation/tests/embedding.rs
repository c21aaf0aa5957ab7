mod common;

use gmfg_core::{DistributionFlow, Graphon};
use gmfg_estimation::{
    embed, empirical_aggregate, AggregateSource, Dataset, Episode, EstimationError, PositionScheme,
    Transition,
};

use common::from_rows;

#[test]
fn two_agents_see_each_other() {
    let w = Graphon::constant(1.0).unwrap();
    let z = empirical_aggregate(&w, &[0.5, 1.0], &[0, 1], 2, 0).unwrap();
    assert_eq!(z.0, vec![0.0, 1.0]);
    let z =
        empirical_aggregate(&Graphon::constant(0.0).unwrap(), &[0.5, 1.0], &[0, 1], 2, 1).unwrap();
    assert_eq!(z.0, vec![0.0, 0.0]);
    assert!(matches!(
        empirical_aggregate(&w, &[1.0], &[0], 2, 0),
        Err(EstimationError::TooFewAgents(1))
    ));
}

#[test]
fn step_graphon_on_three_grid_agents() {
    // Blocks (0, 1/2] and (1/2, 1]: agent 0 at 1/3 is in block 0, agents 1, 2 at 2/3, 1 in block 1.
    let (a, b, c) = (0.9, 0.2, 0.6);
    let w = Graphon::step(vec![vec![a, b], vec![b, c]]).unwrap();
    let pos = PositionScheme::KnownGrid { n: 3 }.positions();
    let states = [0, 1, 0];
    let z0 = empirical_aggregate(&w, &pos, &states, 2, 0).unwrap();
    assert_eq!(z0.0, vec![b / 2.0, b / 2.0]);
    let z1 = empirical_aggregate(&w, &pos, &states, 2, 1).unwrap();
    assert_eq!(z1.0, vec![(b + c) / 2.0, 0.0]);
    let z2 = empirical_aggregate(&w, &pos, &states, 2, 2).unwrap();
    assert_eq!(z2.0, vec![b / 2.0, c / 2.0]);
}

fn two_agent_data(second_states: &[usize]) -> Dataset {
    let rows: Vec<Vec<Vec<(usize, usize, f64)>>> = second_states
        .iter()
        .map(|&s| vec![vec![(1, 0, 0.0)], vec![(s, 1, 0.0)]])
        .collect();
    from_rows(3, PositionScheme::KnownGrid { n: 2 }, &rows)
}

#[test]
fn single_episode_block_is_weighted_indicator() {
    let w = Graphon::exp(3.0).unwrap();
    let data = two_agent_data(&[2]);
    let e = embed(&w, &data, 0, 0, 0, AggregateSource::Episode, None).unwrap();
    assert_eq!((e.s, e.a), (1, 0));
    assert_eq!(e.z, vec![0.0, 0.0, w.eval(0.5, 1.0)]);
    let dense = e.to_dense(2);
    assert_eq!(dense.len(), 3 * 2 * 3);
    let block = (1 * 2) * 3;
    assert_eq!(&dense[block..block + 3], e.z.as_slice());
    assert_eq!(dense.iter().filter(|&&v| v != 0.0).count(), 1);
}

#[test]
fn pooled_embeddings_average_histograms() {
    let w = Graphon::constant(0.8).unwrap();
    let same = two_agent_data(&[2, 2]);
    let single = two_agent_data(&[2]);
    let pooled = embed(&w, &same, 0, 1, 0, AggregateSource::Pooled, None).unwrap();
    let one = embed(&w, &single, 0, 0, 0, AggregateSource::Episode, None).unwrap();
    assert_eq!(pooled, one);

    let differ = two_agent_data(&[0, 2]);
    let pooled = embed(&w, &differ, 0, 0, 0, AggregateSource::Pooled, None).unwrap();
    assert_eq!(pooled.z, vec![0.8 * 0.5, 0.0, 0.8 * 0.5]);
    let per_episode = embed(&w, &differ, 0, 0, 0, AggregateSource::Episode, None).unwrap();
    assert_eq!(per_episode.z, vec![0.8, 0.0, 0.0]);
}

#[test]
fn exact_embeddings_under_constant_one_are_grid_means() {
    let mut flow = DistributionFlow::replicate(&[0.5, 0.5, 0.0], 4, 1);
    flow.dist_mut(0, 0).copy_from_slice(&[1.0, 0.0, 0.0]);
    flow.dist_mut(3, 0).copy_from_slice(&[0.0, 0.25, 0.75]);
    let data = two_agent_data(&[2]);
    let w = Graphon::constant(1.0).unwrap();
    let e = embed(&w, &data, 1, 0, 0, AggregateSource::Flow(&flow), None).unwrap();
    let mean = flow.grid_mean(0);
    for (x, y) in e.z.iter().zip(&mean) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn preconditions_are_enforced() {
    let w = Graphon::constant(0.5).unwrap();
    let data = two_agent_data(&[2]);
    assert!(matches!(
        embed(&w, &data, 0, 0, 0, AggregateSource::Episode, Some(&[1, 0])),
        Err(EstimationError::Scheme(_))
    ));
    let mut episodes = two_agent_data(&[0, 2]).episodes().to_vec();
    let recs = episodes[1].records().to_vec();
    episodes[1] = Episode::new("other", 2, 1, recs).unwrap();
    let mixed = Dataset::new(data.space().clone(), 1, data.scheme().clone(), episodes).unwrap();
    assert!(matches!(
        embed(&w, &mixed, 0, 0, 0, AggregateSource::Pooled, None),
        Err(EstimationError::HeterogeneousPolicies(2))
    ));
    assert!(embed(&w, &mixed, 0, 0, 0, AggregateSource::Episode, None).is_ok());
}

#[test]
fn unknown_positions_follow_the_permutation() {
    let rows = vec![vec![
        vec![(0, 0, 0.0)],
        vec![(1, 0, 0.0)],
        vec![(1, 1, 0.0)],
    ]];
    let data = from_rows(2, PositionScheme::UnknownGrid { n: 3 }, &rows);
    let w = Graphon::exp(3.0).unwrap();
    let e = embed(
        &w,
        &data,
        0,
        0,
        0,
        AggregateSource::Episode,
        Some(&[2, 0, 1]),
    )
    .unwrap();
    // Agent 0 in slot 2 (position 1), peers at 1/3 and 2/3, both infected.
    let expect = (w.eval(1.0, 1.0 / 3.0) + w.eval(1.0, 2.0 / 3.0)) / 2.0;
    assert!((e.z[1] - expect).abs() < 1e-15);
    assert_eq!(e.z[0], 0.0);
}

#[test]
fn dataset_json_round_trip() {
    let data = two_agent_data(&[0, 2]);
    let text = data.to_json().unwrap();
    assert!(text.contains("\"policy_id\""));
    assert!(text.contains("\"s_next\""));
    assert_eq!(Dataset::from_json(&text).unwrap(), data);
    let broken = text.replace("\"a\":\"a1\"", "\"a\":\"zz\"");
    assert_ne!(broken, text);
    assert!(Dataset::from_json(&broken).is_err());
}

#[test]
fn dataset_rejects_inconsistent_records() {
    let space = gmfg_core::StateActionSpace::new(vec![0.0, 1.0], vec!["u".into()]).unwrap();
    let bad_next = vec![
        Transition {
            s: 0,
            a: 0,
            r: 0.0,
            s_next: Some(1),
        },
        Transition {
            s: 0,
            a: 0,
            r: 0.0,
            s_next: None,
        },
        Transition {
            s: 0,
            a: 0,
            r: 0.0,
            s_next: Some(0),
        },
        Transition {
            s: 0,
            a: 0,
            r: 0.0,
            s_next: None,
        },
    ];
    let ep = Episode::new("p", 2, 2, bad_next).unwrap();
    assert!(Dataset::new(space, 2, PositionScheme::KnownGrid { n: 2 }, vec![ep]).is_err());
    assert!(Episode::new("p", 2, 2, vec![]).is_err());
}
