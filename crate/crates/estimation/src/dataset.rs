use gmfg_core::StateActionSpace;
use serde::{Deserialize, Serialize};

use crate::error::{EstimationError, Result};
use crate::scheme::PositionScheme;

/// One `(s, a, r, s')` record by state and action index; `s_next` is absent at the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: Option<usize>,
}

/// All agents' records in one episode, stored `(agent, h)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub policy_id: String,
    agents: usize,
    horizon: usize,
    records: Vec<Transition>,
}

impl Episode {
    pub fn new(
        policy_id: impl Into<String>,
        agents: usize,
        horizon: usize,
        records: Vec<Transition>,
    ) -> Result<Self> {
        if records.len() != agents * horizon {
            return Err(EstimationError::Dataset(format!(
                "episode has {} records for {agents} agents x {horizon} steps",
                records.len()
            )));
        }
        Ok(Self {
            policy_id: policy_id.into(),
            agents,
            horizon,
            records,
        })
    }

    #[inline]
    pub fn get(&self, agent: usize, h: usize) -> &Transition {
        &self.records[agent * self.horizon + h]
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }
}

/// Trajectories of `N` sampled agents over `L` episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    space: StateActionSpace<f64>,
    horizon: usize,
    scheme: PositionScheme,
    episodes: Vec<Episode>,
}

impl Dataset {
    pub fn new(
        space: StateActionSpace<f64>,
        horizon: usize,
        scheme: PositionScheme,
        episodes: Vec<Episode>,
    ) -> Result<Self> {
        scheme.validate()?;
        let n = scheme.n();
        let (ns, na) = (space.n_states(), space.n_actions());
        for (tau, ep) in episodes.iter().enumerate() {
            if ep.agents != n || ep.horizon != horizon {
                return Err(EstimationError::Dataset(format!(
                    "episode {tau} has wrong shape"
                )));
            }
            for (k, t) in ep.records.iter().enumerate() {
                let h = k % horizon;
                let bad_next = match t.s_next {
                    Some(s) => s >= ns || h + 1 == horizon,
                    None => h + 1 < horizon,
                };
                if t.s >= ns || t.a >= na || bad_next || !t.r.is_finite() {
                    return Err(EstimationError::Dataset(format!(
                        "episode {tau}, agent {}, step {h}: invalid record",
                        k / horizon
                    )));
                }
                if h + 1 < horizon && t.s_next != Some(ep.records[k + 1].s) {
                    return Err(EstimationError::Dataset(format!(
                        "episode {tau}, agent {}, step {h}: next state disagrees with the following record",
                        k / horizon
                    )));
                }
            }
        }
        Ok(Self {
            space,
            horizon,
            scheme,
            episodes,
        })
    }

    pub fn space(&self) -> &StateActionSpace<f64> {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn scheme(&self) -> &PositionScheme {
        &self.scheme
    }

    pub fn n_agents(&self) -> usize {
        self.scheme.n()
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    /// States of every agent in episode `tau` at step `h`.
    pub fn states_at(&self, tau: usize, h: usize) -> Vec<usize> {
        (0..self.n_agents())
            .map(|i| self.episodes[tau].get(i, h).s)
            .collect()
    }

    /// Number of distinct behavior policies across episodes.
    pub fn distinct_policies(&self) -> usize {
        let mut ids: Vec<&str> = self.episodes.iter().map(|e| e.policy_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DatasetDoc = serde_json::from_str(text)?;
        doc.into_dataset()
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceDoc {
    states: Vec<f64>,
    actions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    agent: usize,
    h: usize,
    s: f64,
    a: String,
    r: f64,
    s_next: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct EpisodeDoc {
    policy_id: String,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    scheme: PositionScheme,
    positions: Vec<f64>,
    space: SpaceDoc,
    horizon: usize,
    episodes: Vec<EpisodeDoc>,
}

impl From<&Dataset> for DatasetDoc {
    fn from(d: &Dataset) -> Self {
        let sv = |s: usize| d.space.state_value(s);
        let episodes = d
            .episodes
            .iter()
            .map(|ep| EpisodeDoc {
                policy_id: ep.policy_id.clone(),
                steps: ep
                    .records
                    .iter()
                    .enumerate()
                    .map(|(k, t)| StepDoc {
                        agent: k / d.horizon,
                        h: k % d.horizon,
                        s: sv(t.s),
                        a: d.space.actions()[t.a].clone(),
                        r: t.r,
                        s_next: t.s_next.map(sv),
                    })
                    .collect(),
            })
            .collect();
        DatasetDoc {
            positions: d.scheme.positions(),
            scheme: d.scheme.clone(),
            space: SpaceDoc {
                states: d.space.states().to_vec(),
                actions: d.space.actions().to_vec(),
            },
            horizon: d.horizon,
            episodes,
        }
    }
}

impl DatasetDoc {
    fn into_dataset(self) -> Result<Dataset> {
        let space = StateActionSpace::new(self.space.states, self.space.actions)?;
        let n = self.scheme.n();
        let horizon = self.horizon;
        let mut episodes = Vec::with_capacity(self.episodes.len());
        for (tau, ep) in self.episodes.into_iter().enumerate() {
            let mut records: Vec<Option<Transition>> = vec![None; n * horizon];
            for st in ep.steps {
                let bad = || {
                    EstimationError::Dataset(format!(
                        "episode {tau}: step for agent {} at {}",
                        st.agent, st.h
                    ))
                };
                if st.agent >= n || st.h >= horizon {
                    return Err(bad());
                }
                let s = space.state_index(st.s).ok_or_else(bad)?;
                let a = space.action_index(&st.a).ok_or_else(bad)?;
                let s_next = match st.s_next {
                    Some(v) => Some(space.state_index(v).ok_or_else(bad)?),
                    None => None,
                };
                records[st.agent * horizon + st.h] = Some(Transition {
                    s,
                    a,
                    r: st.r,
                    s_next,
                });
            }
            let records = records
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    EstimationError::Dataset(format!("episode {tau} is missing records"))
                })?;
            episodes.push(Episode::new(ep.policy_id, n, horizon, records)?);
        }
        Dataset::new(space, horizon, self.scheme, episodes)
    }
}
