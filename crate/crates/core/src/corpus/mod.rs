//! The protocol corpus: `.scr` fixtures, scenario descriptors, reference
//! actor programs and a harness that runs them.

mod bench;
mod scenarios;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::broker::{RecordError, SessionMessage};
use crate::monitor::{Policy, ViolationReason};
use crate::runtime::{
    CompileError, CompiledProtocol, ProtocolStore, RoleStatus, Runtime, RuntimeConfig,
    RuntimeError, TraceEvent,
};
use crate::scribble::Bindings;

pub use bench::{bench_chain, bench_pingpong, chain_protocol, ChainStats, PingPongStats, Variant};
pub use scenarios::register_warehouse;

macro_rules! fixtures {
    ($($path:literal),* $(,)?) => {
        /// Every fixture file, keyed by its path under `corpus/`.
        pub const FIXTURES: &[(&str, &str)] = &[
            $(($path, include_str!(concat!("../../corpus/", $path)))),*
        ];
    };
}

fixtures![
    "bank_transaction/BankTransaction.scr",
    "bank_transaction/BankTransactions.scr",
    "bank_transaction/scenario.toml",
    "bank_transaction/expected.trace",
    "bank_transactions/scenario.toml",
    "bank_transactions/expected.trace",
    "big/Big.scr",
    "big/scenario.toml",
    "big/expected.trace",
    "cigarette_smoker/CigaretteSmoker.scr",
    "cigarette_smoker/scenario.toml",
    "cigarette_smoker/expected.trace",
    "counter/Counter.scr",
    "counter/scenario.toml",
    "counter/expected.trace",
    "dining_philosophers/DiningPhilosophers.scr",
    "dining_philosophers/scenario.toml",
    "dining_philosophers/expected.trace",
    "fibonacci/Fib.scr",
    "fibonacci/scenario.toml",
    "fibonacci/expected.trace",
    "flat_pingpong/FlatPingPong.scr",
    "flat_pingpong/scenario.toml",
    "flat_pingpong/expected.trace",
    "kfork/KFork.scr",
    "kfork/KForkRefactored.scr",
    "kfork/scenario.toml",
    "kfork/expected.trace",
    "kfork_refactored/scenario.toml",
    "kfork_refactored/expected.trace",
    "logistic_map/LogisticMap.scr",
    "logistic_map/scenario.toml",
    "logistic_map/expected.trace",
    "pcbounded/PCBounded.scr",
    "pcbounded/scenario.toml",
    "pcbounded/expected.trace",
    "rec_pingpong/RecPingPong.scr",
    "rec_pingpong/scenario.toml",
    "rec_pingpong/expected.trace",
    "ring/Ring.scr",
    "ring/RingLoop.scr",
    "ring/scenario.toml",
    "ring/expected.trace",
    "sleeping_barber/SleepingBarber.scr",
    "sleeping_barber/scenario.toml",
    "sleeping_barber/expected.trace",
    "sleeping_barber_deadlock/scenario.toml",
    "sleeping_barber_deadlock/expected.trace",
    "sleeping_barber_termination/scenario.toml",
    "sleeping_barber_termination/expected.trace",
    "sleeping_barber_orphan/scenario.toml",
    "sleeping_barber_orphan/expected.trace",
    "warehouse/Purchase.scr",
    "warehouse/StoreLoad.scr",
    "warehouse/scenario.toml",
    "warehouse/expected.trace",
    "wordcount/WordCount.scr",
    "wordcount/document.txt",
    "wordcount/scenario.toml",
    "wordcount/expected.trace",
];

pub fn fixture(path: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(p, _)| *p == path).map(|(_, s)| *s)
}

/// Paths of every `.scr` fixture.
pub fn protocol_files() -> Vec<&'static str> {
    FIXTURES
        .iter()
        .map(|(p, _)| *p)
        .filter(|p| p.ends_with(".scr"))
        .collect()
}

/// Bindings used to compile the whole corpus at once.
pub fn default_bindings() -> Bindings {
    [("N", 3), ("K", 3), ("depth", 3)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("missing fixture `{0}`")]
    MissingFixture(String),
    #[error("{path}: {message}")]
    Descriptor { path: String, message: String },
    #[error("{path}:{line}: {source}")]
    Trace {
        path: String,
        line: usize,
        source: RecordError,
    },
    #[error("{path}: {source}")]
    Compile { path: String, source: CompileError },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// What a scenario run is expected to end with.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase", deny_unknown_fields)]
pub enum Expect {
    /// Every monitor reaches an accepting state.
    Complete,
    /// The scenario goes quiet mid-protocol without violations.
    Open,
    /// The first violation is at `role` with `reason`.
    Violation { role: String, reason: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    name: String,
    #[serde(default)]
    description: String,
    driver: String,
    protocols: Vec<String>,
    #[serde(default)]
    bindings: BTreeMap<String, i64>,
    #[serde(default)]
    params: toml::Table,
    expect: Expect,
}

/// A runnable corpus program.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// Which reference program sets up actors and sessions.
    pub driver: String,
    pub protocols: Vec<String>,
    pub bindings: Bindings,
    pub params: toml::Table,
    pub expect: Expect,
    /// Seed-independent prefix of the published envelopes, with protocol
    /// ids replaced by `_`.
    pub expected_trace: Vec<SessionMessage>,
}

/// Names of every scenario, in fixture order.
pub fn scenario_names() -> Vec<&'static str> {
    FIXTURES
        .iter()
        .filter_map(|(p, _)| p.strip_suffix("/scenario.toml"))
        .collect()
}

impl Scenario {
    /// Loads a scenario by name. Dashes and underscores are interchangeable.
    pub fn load(name: &str) -> Result<Self, CorpusError> {
        let dir = name.replace('-', "_");
        let path = format!("{dir}/scenario.toml");
        let text = fixture(&path).ok_or_else(|| CorpusError::UnknownScenario(name.to_string()))?;
        let d: Descriptor = toml::from_str(text).map_err(|e| CorpusError::Descriptor {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let trace_path = format!("{dir}/expected.trace");
        let trace_text =
            fixture(&trace_path).ok_or_else(|| CorpusError::MissingFixture(trace_path.clone()))?;
        let expected_trace =
            parse_trace(trace_text).map_err(|(line, source)| CorpusError::Trace {
                path: trace_path,
                line,
                source,
            })?;
        Ok(Scenario {
            name: d.name,
            description: d.description,
            driver: d.driver,
            protocols: d.protocols,
            bindings: d.bindings,
            params: d.params,
            expect: d.expect,
            expected_trace,
        })
    }

    pub fn all() -> Result<Vec<Self>, CorpusError> {
        scenario_names().into_iter().map(Scenario::load).collect()
    }

    /// Compiles every protocol of every listed file under this scenario's
    /// bindings.
    pub fn store(&self) -> Result<Arc<ProtocolStore>, CorpusError> {
        let store = ProtocolStore::new();
        for path in &self.protocols {
            let src = fixture(path).ok_or_else(|| CorpusError::MissingFixture(path.clone()))?;
            let compile_err = |source| CorpusError::Compile {
                path: path.clone(),
                source,
            };
            let c = CompiledProtocol::compile(src, &self.bindings).map_err(compile_err)?;
            store.insert(Arc::new(c));
        }
        Ok(Arc::new(store))
    }

    pub fn int(&self, key: &str, default: i64) -> i64 {
        self.params
            .get(key)
            .and_then(toml::Value::as_integer)
            .unwrap_or(default)
    }

    pub fn real(&self, key: &str, default: f64) -> f64 {
        match self.params.get(key) {
            Some(toml::Value::Float(f)) => *f,
            Some(toml::Value::Integer(i)) => *i as f64,
            _ => default,
        }
    }

    pub fn text(&self, key: &str, default: &str) -> String {
        self.params
            .get(key)
            .and_then(toml::Value::as_str)
            .unwrap_or(default)
            .to_string()
    }

    /// Checks an outcome against the expectation and the trace prefix.
    pub fn verify(&self, outcome: &Outcome) -> Result<(), String> {
        let got = outcome.verdict();
        let ok = match (&self.expect, &got) {
            (Expect::Complete, Verdict::Complete) | (Expect::Open, Verdict::Open) => true,
            (Expect::Violation { role, reason }, Verdict::Violation { role: r, reason: v }) => {
                role == r && *reason == v.to_string()
            }
            _ => false,
        };
        if !ok {
            return Err(format!("expected {:?}, got {got}", self.expect));
        }
        let published = outcome.published();
        for (i, want) in self.expected_trace.iter().enumerate() {
            match published.get(i) {
                Some(m) if matches_envelope(want, m) => {}
                Some(m) => return Err(format!("trace[{i}]: expected {want}, got {m}")),
                None => return Err(format!("trace[{i}]: expected {want}, trace ended")),
            }
        }
        Ok(())
    }
}

/// Envelope equality where a `_` protocol id matches any id.
pub fn matches_envelope(pattern: &SessionMessage, m: &SessionMessage) -> bool {
    (pattern.protocol_id == "_" || pattern.protocol_id == m.protocol_id)
        && pattern.sender_role == m.sender_role
        && pattern.target_role == m.target_role
        && pattern.label == m.label
        && pattern.payload == m.payload
}

/// Parses one envelope record per non-blank, non-`#` line.
pub fn parse_trace(text: &str) -> Result<Vec<SessionMessage>, (usize, RecordError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| SessionMessage::from_record(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// Renders envelopes as trace records with wildcard protocol ids.
pub fn write_trace(msgs: &[SessionMessage]) -> String {
    msgs.iter()
        .map(|m| {
            let mut m = m.clone();
            m.protocol_id = "_".into();
            m.to_record()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub policy: Policy,
    /// Run actors on their own threads instead of the seeded scheduler.
    pub threaded: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 1,
            policy: Policy::Block,
            threaded: false,
        }
    }
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        RunOptions {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Complete,
    Open,
    Violation {
        role: String,
        reason: ViolationReason,
    },
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Complete => f.write_str("complete"),
            Verdict::Open => f.write_str("open"),
            Verdict::Violation { role, reason } => write!(f, "violation at {role}: {reason}"),
        }
    }
}

/// Everything a scenario run left behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub scenario: String,
    pub options: RunOptions,
    pub trace: Vec<TraceEvent>,
    /// Final monitor status of every role handle.
    pub roles: Vec<RoleStatus>,
    /// Program-specific summary, such as a computed total.
    pub result: Option<String>,
    /// Most handlers seen running at once inside one actor.
    pub max_active: usize,
}

impl Outcome {
    pub fn published(&self) -> Vec<SessionMessage> {
        self.trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Published(m) => Some(m.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn dispatched(&self) -> Vec<SessionMessage> {
        self.trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Dispatched { msg, .. } => Some(msg.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn violations(&self) -> Vec<(String, ViolationReason)> {
        self.trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Violation {
                    role, violation, ..
                } => Some((role.clone(), violation.reason)),
                _ => None,
            })
            .collect()
    }

    pub fn all_complete(&self) -> bool {
        !self.roles.is_empty() && self.roles.iter().all(|r| r.complete)
    }

    pub fn verdict(&self) -> Verdict {
        if let Some((role, reason)) = self.violations().into_iter().next() {
            Verdict::Violation { role, reason }
        } else if self.all_complete() {
            Verdict::Complete
        } else {
            Verdict::Open
        }
    }
}

/// Runs a scenario to quiescence.
pub fn run_scenario(sc: &Scenario, opts: RunOptions) -> Result<Outcome, CorpusError> {
    run_with_store(sc, sc.store()?, opts)
}

/// Like [`run_scenario`], reusing an already compiled store.
pub fn run_with_store(
    sc: &Scenario,
    store: Arc<ProtocolStore>,
    opts: RunOptions,
) -> Result<Outcome, CorpusError> {
    let config = RuntimeConfig::default()
        .with_seed(opts.seed)
        .with_policy(opts.policy);
    let rt = Runtime::with_store(store, config);
    if opts.threaded {
        rt.start_threads();
    }
    let setup = scenarios::install(sc, &rt);
    let finished = match setup {
        Ok(collect) => {
            let r = if opts.threaded {
                let idle = rt.wait_idle(Duration::from_secs(30));
                rt.stop_threads();
                if idle {
                    Ok(())
                } else {
                    Err(RuntimeError::ScenarioTimeout { steps: 0 })
                }
            } else {
                rt.run().map(|_| ())
            };
            r.map(|_| collect)
        }
        Err(e) => {
            rt.stop_threads();
            Err(e)
        }
    };
    let collect = finished?;
    Ok(Outcome {
        scenario: sc.name.clone(),
        options: opts,
        trace: rt.take_trace(),
        roles: rt.role_statuses(),
        result: collect(&rt),
        max_active: rt.max_active_handlers(),
    })
}

/// Name and role count of each compiled corpus protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledEntry {
    pub path: String,
    pub protocol: String,
    pub roles: usize,
    pub states: usize,
}

/// Parses, checks, expands, projects and builds monitors for one fixture.
pub fn compile_fixture(path: &str, bindings: &Bindings) -> Result<CompiledProtocol, CorpusError> {
    let src = fixture(path).ok_or_else(|| CorpusError::MissingFixture(path.to_string()))?;
    let compile_err = |source| CorpusError::Compile {
        path: path.to_string(),
        source,
    };
    CompiledProtocol::compile(src, bindings).map_err(compile_err)
}

pub(crate) fn entry(path: &str, c: &CompiledProtocol) -> CompiledEntry {
    CompiledEntry {
        path: path.to_string(),
        protocol: c.name().to_string(),
        roles: c.locals.len(),
        states: c.fsms.values().map(|f| f.state_count()).sum(),
    }
}
