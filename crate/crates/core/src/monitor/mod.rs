//! Finite-state monitors compiled from local protocols.
//!
//! A [`MonitorFsm`] is immutable and shared behind an `Arc`; a
//! [`MonitorState`] is the per-session cursor that checks events against it.
//! Parallel composition is kept as a fork state owning one sub-FSM per branch.

mod build;
mod graph;
mod state;
mod traces;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scribble::Sort;

pub use build::build_fsm;
pub use graph::{parse_graph, to_dot, write_graph, GraphError};
pub use state::{MonitorState, Policy, Violation, ViolationReason};
pub use traces::accepted_traces;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Send,
    Receive,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Send => "send",
            Direction::Receive => "recv",
        }
    }
}

/// One transition label: direction, peer, message label and payload sorts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionKey {
    pub direction: Direction,
    pub peer: String,
    pub label: String,
    pub payload: Vec<Sort>,
}

impl ActionKey {
    pub fn send(peer: &str, label: &str, payload: Vec<Sort>) -> Self {
        ActionKey {
            direction: Direction::Send,
            peer: peer.to_string(),
            label: label.to_string(),
            payload,
        }
    }

    pub fn receive(peer: &str, label: &str, payload: Vec<Sort>) -> Self {
        ActionKey {
            direction: Direction::Receive,
            peer: peer.to_string(),
            label: label.to_string(),
            payload,
        }
    }

    pub(crate) fn signature(&self) -> String {
        let sorts: Vec<&str> = self.payload.iter().map(|s| s.keyword()).collect();
        format!("{}({})", self.label, sorts.join(", "))
    }
}

impl fmt::Display for ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.direction {
            Direction::Send => '!',
            Direction::Receive => '?',
        };
        write!(f, "{}{mark}{}", self.peer, self.signature())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub key: ActionKey,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fork {
    pub regions: Vec<Arc<MonitorFsm>>,
    pub join: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FsmState {
    pub edges: Vec<Edge>,
    pub accepting: bool,
    pub fork: Option<Fork>,
}

/// States are numbered in depth-first pre-order from `initial`, which is 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorFsm {
    pub protocol: String,
    pub role: String,
    pub initial: usize,
    pub states: Vec<FsmState>,
}

impl MonitorFsm {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.states.iter().map(|s| s.edges.len()).sum()
    }

    pub fn accepting(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.states[i].accepting)
            .collect()
    }

    /// Target of the transition from `state` labelled `key`.
    pub fn step(&self, state: usize, key: &ActionKey) -> Option<usize> {
        self.states[state]
            .edges
            .iter()
            .find(|e| e.key == *key)
            .map(|e| e.target)
    }

    /// True when no state has two transitions with the same key, here and in
    /// every region.
    pub fn is_deterministic(&self) -> bool {
        self.states.iter().all(|s| {
            let mut keys: Vec<&ActionKey> = s.edges.iter().map(|e| &e.key).collect();
            keys.sort();
            keys.windows(2).all(|w| w[0] != w[1])
                && s.fork
                    .as_ref()
                    .is_none_or(|f| f.regions.iter().all(|r| r.is_deterministic()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("nondeterministic protocol for `{role}`: {detail}")]
    NondeterministicProtocol { role: String, detail: String },
}
