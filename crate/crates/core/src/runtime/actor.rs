use std::any::Any;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::system::Shared;
use super::{
    ActorId, ActorSpec, CompiledProtocol, DiagnosticKind, ProtocolDecl, RuntimeError, TraceEvent,
    ERROR_LABEL, JOIN_LABEL, READY_LABEL, SELF_SENDER,
};
use crate::broker::{SessionMessage, Value};
use crate::monitor::{Direction, MonitorState, Policy};
use crate::projection::LocalProtocol;

/// Where messages for a peer go: the session exchange and a routing key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerAddr {
    pub exchange: String,
    pub key: String,
}

/// An actor's view of one role in one session.
#[derive(Debug, Clone)]
pub struct RoleHandle {
    pub protocol_id: String,
    pub protocol_name: String,
    pub self_role: String,
    pub role_var: String,
    pub peers: BTreeMap<String, PeerAddr>,
    pub monitor: MonitorState,
    pub closed: bool,
    pub(crate) compiled: Arc<CompiledProtocol>,
    pub(crate) seq: u64,
}

pub(crate) type HandleKey = (String, String);

pub(crate) struct ActorCore {
    pub id: ActorId,
    pub actor_type: String,
    pub queue: String,
    pub decls: Vec<ProtocolDecl>,
    pub roles: HashMap<HandleKey, RoleHandle>,
    pub next_seq: u64,
    pub rng: ChaCha8Rng,
}

impl ActorCore {
    fn diag(&self, shared: &Shared, pid: &str, role: &str, kind: DiagnosticKind, message: String) {
        log::debug!("actor {} {role}: {kind}: {message}", self.id);
        shared.record(TraceEvent::Diagnostic {
            actor: self.id,
            protocol_id: pid.to_string(),
            role: role.to_string(),
            kind,
            message,
        });
    }
}

/// What a handler sees: the session it runs in and the actor's other roles.
pub struct Ctx<'a> {
    core: &'a mut ActorCore,
    shared: &'a Shared,
    current: HandleKey,
}

impl<'a> Ctx<'a> {
    fn handle(&self) -> &RoleHandle {
        &self.core.roles[&self.current]
    }

    pub fn actor_id(&self) -> ActorId {
        self.core.id
    }

    pub fn protocol_id(&self) -> &str {
        &self.current.0
    }

    pub fn protocol_name(&self) -> &str {
        &self.handle().protocol_name
    }

    pub fn self_role(&self) -> &str {
        &self.current.1
    }

    pub fn role_var(&self) -> &str {
        &self.handle().role_var
    }

    /// Index of this role within its group, if it belongs to one.
    pub fn self_index(&self) -> Option<i64> {
        self.handle()
            .compiled
            .global
            .role(&self.current.1)
            .and_then(|d| d.index)
    }

    /// Every role of the session in declaration order, self included.
    pub fn roles(&self) -> Vec<String> {
        self.handle().compiled.role_names()
    }

    /// Members of a group family ordered by index.
    pub fn family(&self, family: &str) -> Vec<String> {
        let mut v: Vec<(i64, String)> = self
            .handle()
            .compiled
            .global
            .roles
            .iter()
            .filter(|d| d.family_name() == family)
            .map(|d| (d.index.unwrap_or(0), d.canonical().to_string()))
            .collect();
        v.sort();
        v.into_iter().map(|(_, n)| n).collect()
    }

    /// Position-indexed peer lookup, e.g. `("W", 2)` is `W2`.
    pub fn peer_indexed(&self, family: &str, index: i64) -> Result<String, RuntimeError> {
        self.handle()
            .compiled
            .family_member(family, index)
            .ok_or_else(|| RuntimeError::UnknownPeer {
                role: self.current.1.clone(),
                peer: format!("{family}[{index}]"),
            })
    }

    /// This role's projected local protocol.
    pub fn local(&self) -> &LocalProtocol {
        let h = self.handle();
        &h.compiled.locals[&h.self_role]
    }

    pub fn is_complete(&self) -> bool {
        self.handle().monitor.is_complete()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.core.rng
    }

    pub fn send(&mut self, to: &str, label: &str, payload: Vec<Value>) -> Result<(), RuntimeError> {
        let key = self.current.clone();
        self.send_on(&key, &[to], label, payload)
    }

    /// One local multicast: every receiver is checked before any message
    /// leaves, then one copy goes to each receiver in list order.
    pub fn send_multi(
        &mut self,
        to: &[&str],
        label: &str,
        payload: Vec<Value>,
    ) -> Result<(), RuntimeError> {
        let key = self.current.clone();
        self.send_on(&key, to, label, payload)
    }

    /// Sends in another session this actor plays as `role_var`.
    pub fn send_as(
        &mut self,
        role_var: &str,
        to: &str,
        label: &str,
        payload: Vec<Value>,
    ) -> Result<(), RuntimeError> {
        let key = self.resolve(role_var)?;
        self.send_on(&key, &[to], label, payload)
    }

    fn send_on(
        &mut self,
        key: &HandleKey,
        to: &[&str],
        label: &str,
        payload: Vec<Value>,
    ) -> Result<(), RuntimeError> {
        let shared = self.shared;
        let actor = self.core.id;
        let h = self
            .core
            .roles
            .get_mut(key)
            .ok_or_else(|| RuntimeError::UnknownRole(key.1.clone()))?;
        if h.closed {
            return Err(RuntimeError::SessionClosed {
                protocol_id: key.0.clone(),
                role: key.1.clone(),
            });
        }
        if let Some(peer) = to.iter().find(|t| !h.peers.contains_key(**t)) {
            return Err(RuntimeError::UnknownPeer {
                role: key.1.clone(),
                peer: peer.to_string(),
            });
        }
        let msgs: Vec<SessionMessage> = to
            .iter()
            .map(|t| SessionMessage::new(&key.0, &key.1, *t, label, payload.clone()))
            .collect();
        let mut advanced = None;
        if shared.config.monitoring {
            let mut m = h.monitor.clone();
            for msg in &msgs {
                if let Err(v) = m.check(Direction::Send, msg) {
                    shared.record(TraceEvent::Violation {
                        actor,
                        protocol_id: key.0.clone(),
                        role: key.1.clone(),
                        violation: v.clone(),
                    });
                    if m.policy == Policy::Block {
                        return Err(RuntimeError::ProtocolViolation {
                            role: key.1.clone(),
                            violation: Box::new(v),
                        });
                    }
                    log::warn!("{}: sending despite violation: {v}", key.1);
                }
            }
            advanced = Some(m);
        }
        let result = if msgs.len() == 1 {
            shared
                .broker
                .publish(&key.0, &msgs[0].target_role, msgs[0].clone())
        } else {
            shared.broker.publish_many(
                &key.0,
                msgs.iter()
                    .map(|m| (m.target_role.clone(), m.clone()))
                    .collect(),
            )
        };
        if let Err(e) = result {
            self.core.diag(
                shared,
                &key.0,
                &key.1,
                DiagnosticKind::Unroutable,
                e.to_string(),
            );
            return Err(e.into());
        }
        if let Some(m) = advanced {
            if let Some(h) = self.core.roles.get_mut(key) {
                h.monitor = m;
            }
        }
        if shared.config.tracing {
            for m in msgs {
                shared.record(TraceEvent::Published(m));
            }
        }
        Ok(())
    }

    /// The handle for `role_var`: the current session when it is bound to
    /// that variable, otherwise the most recently joined open one.
    fn resolve(&self, role_var: &str) -> Result<HandleKey, RuntimeError> {
        if self.handle().role_var == role_var {
            return Ok(self.current.clone());
        }
        self.core
            .roles
            .iter()
            .filter(|(_, h)| h.role_var == role_var && !h.closed)
            .max_by_key(|(_, h)| h.seq)
            .map(|(k, _)| k.clone())
            .ok_or_else(|| RuntimeError::UnknownRole(role_var.to_string()))
    }

    /// Queues a message to this actor under `role_var`, switching the role
    /// that handles it.
    pub fn become_(
        &mut self,
        role_var: &str,
        label: &str,
        payload: Vec<Value>,
    ) -> Result<(), RuntimeError> {
        let (pid, role) = self.resolve(role_var)?;
        let msg = SessionMessage::new(pid, SELF_SENDER, role, label, payload);
        self.shared.broker.enqueue(&self.core.queue, msg)?;
        Ok(())
    }

    /// Leaves the current session. Closing twice does nothing.
    pub fn close(&mut self) {
        let (pid, role) = self.current.clone();
        let shared = self.shared;
        let h = self
            .core
            .roles
            .get_mut(&self.current)
            .expect("current handle");
        if h.closed {
            return;
        }
        h.closed = true;
        let complete = h.monitor.is_complete();
        if let Err(e) = shared.broker.unbind(&pid, &role, &self.core.queue) {
            log::debug!("close: {e}");
        }
        if !complete {
            self.core.diag(
                shared,
                &pid,
                &role,
                DiagnosticKind::PrematureClose,
                "closed before the protocol completed".into(),
            );
        }
    }
}

pub(crate) trait AnyActor: Send {
    fn core(&self) -> &ActorCore;
    fn handle(&mut self, shared: &Shared, msg: SessionMessage);
    fn state(&self) -> &dyn Any;
}

pub(crate) struct Actor<S> {
    pub core: ActorCore,
    pub spec: Arc<ActorSpec<S>>,
    pub state: S,
}

impl<S: Send + 'static> AnyActor for Actor<S> {
    fn core(&self) -> &ActorCore {
        &self.core
    }

    fn state(&self) -> &dyn Any {
        &self.state
    }

    fn handle(&mut self, shared: &Shared, msg: SessionMessage) {
        match msg.label.as_str() {
            JOIN_LABEL => self.join(shared, msg),
            READY_LABEL => self.ready(shared, msg),
            ERROR_LABEL => self.remote_error(shared, msg),
            _ => self.deliver(shared, msg),
        }
    }
}

impl<S: Send + 'static> Actor<S> {
    fn join(&mut self, shared: &Shared, msg: SessionMessage) {
        let pid = msg.protocol_id;
        let role = msg.target_role;
        let core = &mut self.core;
        let fail =
            |core: &ActorCore, kind, text: String| core.diag(shared, &pid, &role, kind, text);
        let key = (pid.clone(), role.clone());
        if core.roles.contains_key(&key) {
            let e = RuntimeError::AlreadyJoined {
                protocol_id: pid.clone(),
                role: role.clone(),
            };
            fail(core, DiagnosticKind::AlreadyJoined, e.to_string());
            return;
        }
        let Some(Value::Str(protocol)) = msg.payload.first() else {
            fail(
                core,
                DiagnosticKind::Discarded,
                "join without protocol".into(),
            );
            return;
        };
        let Some(compiled) = shared.store.get(protocol) else {
            fail(
                core,
                DiagnosticKind::Discarded,
                format!("unknown protocol {protocol}"),
            );
            return;
        };
        let family = compiled.family_of(&role);
        let Some(decl) = core.decls.iter().find(|d| {
            d.protocol == *protocol
                && (d.self_role == role || Some(&d.self_role) == family.as_ref())
        }) else {
            fail(
                core,
                DiagnosticKind::Discarded,
                format!("type does not play {role}"),
            );
            return;
        };
        if let Err(e) = shared.broker.bind(&pid, &role, &core.queue) {
            fail(core, DiagnosticKind::Discarded, e.to_string());
            return;
        }
        let peers = compiled
            .role_names()
            .into_iter()
            .filter(|r| *r != role)
            .map(|r| {
                let addr = PeerAddr {
                    exchange: pid.clone(),
                    key: r.clone(),
                };
                (r, addr)
            })
            .collect();
        let fsm = compiled.fsms[&role].clone();
        core.next_seq += 1;
        let handle = RoleHandle {
            protocol_id: pid.clone(),
            protocol_name: protocol.clone(),
            self_role: role.clone(),
            role_var: decl.role_var.clone(),
            peers,
            monitor: MonitorState::with_policy(fsm, shared.config.policy),
            closed: false,
            compiled,
            seq: core.next_seq,
        };
        core.roles.insert(key, handle);
        shared.ack_join(&pid, &role, core.id);
    }

    fn ready(&mut self, shared: &Shared, msg: SessionMessage) {
        let key = (msg.protocol_id, msg.target_role);
        let Some(h) = self.core.roles.get(&key) else {
            return;
        };
        let Some(hook) = self.spec.on_join.get(&h.role_var).cloned() else {
            return;
        };
        let mut ctx = Ctx {
            core: &mut self.core,
            shared,
            current: key.clone(),
        };
        if let Err(e) = hook(&mut self.state, &mut ctx) {
            self.core.diag(
                shared,
                &key.0,
                &key.1,
                DiagnosticKind::HandlerError,
                e.to_string(),
            );
        }
    }

    fn remote_error(&mut self, shared: &Shared, msg: SessionMessage) {
        let text = msg
            .payload
            .iter()
            .filter_map(Value::as_str)
            .collect::<Vec<_>>()
            .join(": ");
        self.core.diag(
            shared,
            &msg.protocol_id,
            &msg.target_role,
            DiagnosticKind::RemoteViolation,
            format!("{} rejected a message: {text}", msg.sender_role),
        );
        if let Some(hook) = self.spec.on_error.clone() {
            hook(&mut self.state, &msg);
        }
    }

    fn deliver(&mut self, shared: &Shared, msg: SessionMessage) {
        let key = (msg.protocol_id.clone(), msg.target_role.clone());
        let Some(h) = self.core.roles.get_mut(&key) else {
            self.core.diag(
                shared,
                &key.0,
                &key.1,
                DiagnosticKind::Discarded,
                format!("no session for {msg}"),
            );
            return;
        };
        if h.closed {
            self.core.diag(
                shared,
                &key.0,
                &key.1,
                DiagnosticKind::Discarded,
                format!("session closed: {msg}"),
            );
            return;
        }
        let from_self = msg.sender_role == SELF_SENDER;
        if !from_self && shared.config.monitoring {
            if let Err(v) = h.monitor.check(Direction::Receive, &msg) {
                let policy = h.monitor.policy;
                shared.record(TraceEvent::Violation {
                    actor: self.core.id,
                    protocol_id: key.0.clone(),
                    role: key.1.clone(),
                    violation: v.clone(),
                });
                if let Some(hook) = self.spec.wrong_message.clone() {
                    hook(&mut self.state, &msg, &v);
                }
                if policy == Policy::Block {
                    let err = SessionMessage::new(
                        &key.0,
                        &key.1,
                        &msg.sender_role,
                        ERROR_LABEL,
                        vec![Value::Str(v.reason.to_string()), Value::Str(v.to_string())],
                    );
                    if let Err(e) = shared.broker.publish(&key.0, &msg.sender_role, err) {
                        log::debug!("error envelope not delivered: {e}");
                    }
                    return;
                }
                log::warn!("{}: dispatching despite violation: {v}", key.1);
            }
        }
        let h = &self.core.roles[&key];
        let family = if from_self {
            None
        } else {
            h.compiled.family_of(&msg.sender_role)
        };
        let Some(handler) = self
            .spec
            .handler(&h.role_var, &msg.label, &msg.sender_role, family.as_deref())
            .cloned()
        else {
            let text = format!("no handler for `{}` from `{}`", msg.label, msg.sender_role);
            self.core
                .diag(shared, &key.0, &key.1, DiagnosticKind::NoHandler, text);
            return;
        };
        if shared.config.tracing {
            shared.record(TraceEvent::Dispatched {
                actor: self.core.id,
                msg: msg.clone(),
            });
        }
        let mut ctx = Ctx {
            core: &mut self.core,
            shared,
            current: key.clone(),
        };
        if let Err(e) = handler(&mut self.state, &mut ctx, &msg) {
            self.core.diag(
                shared,
                &key.0,
                &key.1,
                DiagnosticKind::HandlerError,
                e.to_string(),
            );
        }
    }
}
