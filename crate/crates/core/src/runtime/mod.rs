//! Session actors on top of the in-process broker.
//!
//! Each actor owns one inbox queue and runs handlers to completion. Sessions
//! are created by [`Runtime::protocol_create`]: it mints a protocol id,
//! declares a direct exchange under that id and invites one actor per role.
//! Every send and receive is checked against the role's monitor before it
//! takes effect.

mod actor;
mod spec;
mod store;
mod system;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::broker::{BrokerError, SessionMessage};
use crate::monitor::{Policy, Violation};

pub use actor::{Ctx, PeerAddr, RoleHandle};
pub use spec::{ActorSpec, ProtocolDecl};
pub use store::{CompileError, CompiledProtocol, ProtocolStore};
pub use system::{Assign, Directory, RoleStatus, Runtime};

pub type ActorId = usize;

/// Reserved labels. Envelopes carrying them bypass monitors.
pub const JOIN_LABEL: &str = "__join";
pub const READY_LABEL: &str = "__ready";
pub const ERROR_LABEL: &str = "__monitor_error";
/// Sender role of `become` envelopes.
pub const SELF_SENDER: &str = "self";
/// Sender role of runtime control envelopes.
pub const RUNTIME_SENDER: &str = "__runtime";

pub fn is_reserved(label: &str) -> bool {
    label.starts_with("__")
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub policy: Policy,
    /// When false, sends and receives skip their monitors entirely.
    pub monitoring: bool,
    /// When false, only violations and diagnostics are traced.
    pub tracing: bool,
    pub join_timeout: Duration,
    /// Seeds protocol ids, the deterministic scheduler and actor RNGs.
    pub seed: u64,
    /// Step budget of [`Runtime::run`].
    pub max_steps: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            policy: Policy::Block,
            monitoring: true,
            tracing: true,
            join_timeout: Duration::from_secs(5),
            seed: 0,
            max_steps: 1_000_000,
        }
    }
}

impl RuntimeConfig {
    /// Defaults, with the policy taken from `SESSION_POLICY` when set.
    pub fn from_env() -> Self {
        let mut c = RuntimeConfig::default();
        if let Ok(v) = std::env::var("SESSION_POLICY") {
            match v.parse() {
                Ok(p) => c.policy = p,
                Err(e) => log::warn!("ignoring SESSION_POLICY: {e}"),
            }
        }
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_monitoring(mut self, monitoring: bool) -> Self {
        self.monitoring = monitoring;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    PrematureClose,
    Discarded,
    NoHandler,
    AlreadyJoined,
    HandlerError,
    Unroutable,
    RemoteViolation,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// A protocol message left its sender.
    Published(SessionMessage),
    /// A message reached a handler.
    Dispatched { actor: ActorId, msg: SessionMessage },
    /// A monitor rejected an event at `role`.
    Violation {
        actor: ActorId,
        protocol_id: String,
        role: String,
        violation: Violation,
    },
    Diagnostic {
        actor: ActorId,
        protocol_id: String,
        role: String,
        kind: DiagnosticKind,
        message: String,
    },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Published(m) => write!(f, "publish  {m}"),
            TraceEvent::Dispatched { actor, msg } => write!(f, "dispatch actor={actor} {msg}"),
            TraceEvent::Violation {
                actor,
                role,
                violation,
                ..
            } => write!(f, "VIOLATION actor={actor} role={role} {violation}"),
            TraceEvent::Diagnostic {
                actor,
                role,
                kind,
                message,
                ..
            } => write!(f, "diagnostic actor={actor} role={role} {kind}: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error(
        "actor type `{actor_type}` has no handler for `{label}` from `{sender}` as `{role_var}`"
    )]
    MissingHandler {
        actor_type: String,
        role_var: String,
        label: String,
        sender: String,
    },
    #[error("actor type `{actor_type}` handles `{label}` from `{declared}`, but it comes from `{actual}`")]
    HandlerSenderMismatch {
        actor_type: String,
        label: String,
        declared: String,
        actual: String,
    },
    #[error("actor type `{actor_type}` uses undeclared role variable `{role_var}`")]
    UnknownRoleVar {
        actor_type: String,
        role_var: String,
    },
    #[error("protocol `{protocol}` has no role `{role}`")]
    UnknownProtocolRole { protocol: String, role: String },
    #[error("actor type `{0}` is already registered")]
    DuplicateActorType(String),
    #[error("unknown actor type `{0}`")]
    UnknownActorType(String),
    #[error("unknown actor {0}")]
    UnknownActor(ActorId),
    #[error("actor type `{actor_type}` does not play `{role}` in `{protocol}`")]
    RoleNotPlayed {
        actor_type: String,
        protocol: String,
        role: String,
    },
    #[error("role `{role}` of `{protocol}` is not assigned")]
    UnassignedRole { protocol: String, role: String },
    #[error("roles {missing:?} of `{protocol}` did not join in time")]
    JoinTimeout {
        protocol: String,
        missing: Vec<String>,
    },
    #[error("already joined `{role}` in session {protocol_id}")]
    AlreadyJoined { protocol_id: String, role: String },
    #[error("role variable `{0}` has no joined session")]
    UnknownRole(String),
    #[error("`{peer}` is not a peer of `{role}`")]
    UnknownPeer { role: String, peer: String },
    #[error("protocol violation at `{role}`: {violation}")]
    ProtocolViolation {
        role: String,
        violation: Box<Violation>,
    },
    #[error("session {protocol_id} is closed for `{role}`")]
    SessionClosed { protocol_id: String, role: String },
    #[error("scenario did not settle within {steps} steps")]
    ScenarioTimeout { steps: usize },
    #[error("actor state has a different type")]
    StateType,
    #[error("{0}")]
    Handler(String),
    #[error(transparent)]
    Broker(#[from] BrokerError),
}

impl RuntimeError {
    /// Free-form handler failure.
    pub fn handler(msg: impl Into<String>) -> Self {
        RuntimeError::Handler(msg.into())
    }
}
