use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Ctx, ProtocolStore, RuntimeError, SELF_SENDER};
use crate::broker::SessionMessage;
use crate::monitor::Violation;

pub(crate) type Handler<S> =
    Arc<dyn Fn(&mut S, &mut Ctx<'_>, &SessionMessage) -> Result<(), RuntimeError> + Send + Sync>;
pub(crate) type JoinHook<S> =
    Arc<dyn Fn(&mut S, &mut Ctx<'_>) -> Result<(), RuntimeError> + Send + Sync>;
pub(crate) type MessageHook<S> = Arc<dyn Fn(&mut S, &SessionMessage, &Violation) + Send + Sync>;
pub(crate) type ErrorHook<S> = Arc<dyn Fn(&mut S, &SessionMessage) + Send + Sync>;

/// `role_var: protocol as self_role`. `self_role` names a concrete role or a
/// group family, in which case the actor can play any member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolDecl {
    pub role_var: String,
    pub protocol: String,
    pub self_role: String,
}

pub(crate) struct HandlerEntry<S> {
    pub role_var: String,
    pub label: String,
    /// A role name, a family name, or `self` for `become` messages.
    pub sender: String,
    pub handler: Handler<S>,
}

/// Declarative description of an actor type: its protocols and handlers.
pub struct ActorSpec<S> {
    pub actor_type: String,
    pub(crate) factory: Arc<dyn Fn() -> S + Send + Sync>,
    pub(crate) decls: Vec<ProtocolDecl>,
    pub(crate) handlers: Vec<HandlerEntry<S>>,
    pub(crate) on_join: BTreeMap<String, JoinHook<S>>,
    pub(crate) wrong_message: Option<MessageHook<S>>,
    pub(crate) on_error: Option<ErrorHook<S>>,
}

impl<S> ActorSpec<S> {
    pub fn new(actor_type: &str, factory: impl Fn() -> S + Send + Sync + 'static) -> Self {
        ActorSpec {
            actor_type: actor_type.to_string(),
            factory: Arc::new(factory),
            decls: Vec::new(),
            handlers: Vec::new(),
            on_join: BTreeMap::new(),
            wrong_message: None,
            on_error: None,
        }
    }

    pub fn protocol(mut self, role_var: &str, protocol: &str, self_role: &str) -> Self {
        self.decls.push(ProtocolDecl {
            role_var: role_var.to_string(),
            protocol: protocol.to_string(),
            self_role: self_role.to_string(),
        });
        self
    }

    /// Handles `label` from `sender` in the session bound to `role_var`.
    pub fn on(
        mut self,
        role_var: &str,
        label: &str,
        sender: &str,
        handler: impl Fn(&mut S, &mut Ctx<'_>, &SessionMessage) -> Result<(), RuntimeError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.handlers.push(HandlerEntry {
            role_var: role_var.to_string(),
            label: label.to_string(),
            sender: sender.to_string(),
            handler: Arc::new(handler),
        });
        self
    }

    /// Runs once every role of a new `role_var` session has joined.
    pub fn on_join(
        mut self,
        role_var: &str,
        hook: impl Fn(&mut S, &mut Ctx<'_>) -> Result<(), RuntimeError> + Send + Sync + 'static,
    ) -> Self {
        self.on_join.insert(role_var.to_string(), Arc::new(hook));
        self
    }

    /// Called with every incoming message its monitor rejects.
    pub fn on_wrong_message(
        mut self,
        hook: impl Fn(&mut S, &SessionMessage, &Violation) + Send + Sync + 'static,
    ) -> Self {
        self.wrong_message = Some(Arc::new(hook));
        self
    }

    /// Called with error envelopes sent back by peers that blocked a message.
    pub fn on_error(
        mut self,
        hook: impl Fn(&mut S, &SessionMessage) + Send + Sync + 'static,
    ) -> Self {
        self.on_error = Some(Arc::new(hook));
        self
    }

    pub fn decls(&self) -> &[ProtocolDecl] {
        &self.decls
    }

    /// Finds the handler for a message arriving at `role_var`.
    pub(crate) fn handler(
        &self,
        role_var: &str,
        label: &str,
        sender: &str,
        sender_family: Option<&str>,
    ) -> Option<&Handler<S>> {
        self.handlers
            .iter()
            .find(|h| {
                h.role_var == role_var
                    && h.label == label
                    && (h.sender == sender || Some(h.sender.as_str()) == sender_family)
            })
            .map(|h| &h.handler)
    }

    /// Checks that every receivable message of every declared role has a
    /// handler with the right sender.
    pub(crate) fn validate(&self, store: &ProtocolStore) -> Result<(), RuntimeError> {
        for h in &self.handlers {
            if !self.decls.iter().any(|d| d.role_var == h.role_var) {
                return Err(RuntimeError::UnknownRoleVar {
                    actor_type: self.actor_type.clone(),
                    role_var: h.role_var.clone(),
                });
            }
        }
        for d in &self.decls {
            let c = store
                .get(&d.protocol)
                .ok_or_else(|| RuntimeError::UnknownProtocol(d.protocol.clone()))?;
            let roles = c.roles_matching(&d.self_role);
            if roles.is_empty() {
                return Err(RuntimeError::UnknownProtocolRole {
                    protocol: d.protocol.clone(),
                    role: d.self_role.clone(),
                });
            }
            for role in roles {
                for (sender, label) in c.locals[&role].receivable() {
                    let family = c.family_of(&sender);
                    if self
                        .handler(&d.role_var, &label, &sender, family.as_deref())
                        .is_some()
                    {
                        continue;
                    }
                    let other = self.handlers.iter().find(|h| {
                        h.role_var == d.role_var && h.label == label && h.sender != SELF_SENDER
                    });
                    return Err(match other {
                        Some(h) => RuntimeError::HandlerSenderMismatch {
                            actor_type: self.actor_type.clone(),
                            label,
                            declared: h.sender.clone(),
                            actual: sender,
                        },
                        None => RuntimeError::MissingHandler {
                            actor_type: self.actor_type.clone(),
                            role_var: d.role_var.clone(),
                            label,
                            sender,
                        },
                    });
                }
            }
        }
        Ok(())
    }
}
