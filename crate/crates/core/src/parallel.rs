//! Data-parallel batch operations over the corpus.
//!
//! With the `parallel` feature each batch fans out over rayon's pool;
//! without it, or under [`ExecMode::Sequential`], items run one after
//! another on the calling thread. Results keep input order either way.

use std::collections::BTreeSet;
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::{
    compile_fixture, entry, protocol_files, run_with_store, CompiledEntry, CorpusError, Outcome,
    RunOptions, Scenario,
};
use crate::monitor::{accepted_traces, ActionKey, MonitorFsm, MonitorState};
use crate::scribble::Bindings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Parallel,
    Sequential,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Maps `f` over `items`, in parallel when the mode and build allow it.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Compiles every corpus protocol under `bindings`.
pub fn compile_all(mode: ExecMode, bindings: &Bindings) -> Vec<Result<CompiledEntry, CorpusError>> {
    map(mode, &protocol_files(), |path| {
        compile_fixture(path, bindings).map(|c| entry(path, &c))
    })
}

/// Runs one scenario under each seed, sharing one compiled store.
pub fn sweep_seeds(
    mode: ExecMode,
    sc: &Scenario,
    seeds: &[u64],
    base: RunOptions,
) -> Result<Vec<Result<Outcome, CorpusError>>, CorpusError> {
    let store = sc.store()?;
    Ok(map(mode, seeds, |seed| {
        run_with_store(
            sc,
            Arc::clone(&store),
            RunOptions {
                seed: *seed,
                ..base
            },
        )
    }))
}

/// Every key on any edge of `fsm` or of its fork regions.
pub fn alphabet(fsm: &MonitorFsm) -> BTreeSet<ActionKey> {
    let mut out = BTreeSet::new();
    for st in &fsm.states {
        out.extend(st.edges.iter().map(|e| e.key.clone()));
        if let Some(f) = &st.fork {
            for r in &f.regions {
                out.extend(alphabet(r));
            }
        }
    }
    out
}

/// Sequences of length at most `max_len` accepted by iterated
/// [`MonitorState::check_key`], found by trying every alphabet key at every
/// step.
pub fn monitor_traces(fsm: &Arc<MonitorFsm>, max_len: usize) -> BTreeSet<Vec<ActionKey>> {
    let keys: Vec<ActionKey> = alphabet(fsm).into_iter().collect();
    let mut out = BTreeSet::new();
    let mut prefix = Vec::new();
    explore(
        &MonitorState::new(Arc::clone(fsm)),
        &keys,
        max_len,
        &mut prefix,
        &mut out,
    );
    out
}

fn explore(
    m: &MonitorState,
    keys: &[ActionKey],
    budget: usize,
    prefix: &mut Vec<ActionKey>,
    out: &mut BTreeSet<Vec<ActionKey>>,
) {
    out.insert(prefix.clone());
    if budget == 0 {
        return;
    }
    for k in keys {
        let mut next = m.clone();
        if next.check_key(k).is_ok() {
            prefix.push(k.clone());
            explore(&next, keys, budget - 1, prefix, out);
            prefix.pop();
        }
    }
}

/// Result of comparing the monitor with the trace oracle on one FSM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub protocol: String,
    pub role: String,
    pub states: usize,
    pub traces: usize,
    /// Accepted by the monitor but not by the oracle.
    pub monitor_only: usize,
    /// Accepted by the oracle but not by the monitor.
    pub oracle_only: usize,
}

impl OracleReport {
    pub fn agrees(&self) -> bool {
        self.monitor_only == 0 && self.oracle_only == 0
    }
}

pub fn oracle_check(fsm: &Arc<MonitorFsm>, max_len: usize) -> OracleReport {
    let by_monitor = monitor_traces(fsm, max_len);
    let by_oracle = accepted_traces(fsm, max_len);
    OracleReport {
        protocol: fsm.protocol.clone(),
        role: fsm.role.clone(),
        states: fsm.state_count(),
        traces: by_oracle.len(),
        monitor_only: by_monitor.difference(&by_oracle).count(),
        oracle_only: by_oracle.difference(&by_monitor).count(),
    }
}

/// Runs [`oracle_check`] on each FSM.
pub fn oracle_check_all(
    mode: ExecMode,
    fsms: &[Arc<MonitorFsm>],
    max_len: usize,
) -> Vec<OracleReport> {
    map(mode, fsms, |f| oracle_check(f, max_len))
}
