use serde::{Deserialize, Serialize};

use crate::error::{GmfgError, Result};
use crate::scalar::Real;

/// Finite state set embedded in the real line plus a finite labelled action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateActionSpace<T> {
    states: Vec<T>,
    actions: Vec<String>,
}

impl<T: Real> StateActionSpace<T> {
    pub fn new(states: Vec<T>, actions: Vec<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(GmfgError::InvalidSpace("empty state set".into()));
        }
        if actions.is_empty() {
            return Err(GmfgError::InvalidSpace("empty action set".into()));
        }
        for (i, a) in states.iter().enumerate() {
            if !a.is_finite() {
                return Err(GmfgError::InvalidSpace(format!("state {i} is not finite")));
            }
            if states[..i].iter().any(|b| b == a) {
                return Err(GmfgError::InvalidSpace(format!(
                    "duplicate state value {a}"
                )));
            }
        }
        Ok(Self { states, actions })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[T] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn state_value(&self, s: usize) -> T {
        self.states[s]
    }

    /// Index of a state given its value, exact match.
    pub fn state_index(&self, value: T) -> Option<usize> {
        self.states.iter().position(|&v| v == value)
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == label)
    }
}
