//! Endpoint projection of global protocols onto single roles.

mod project;
mod text;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::scribble::{ExpandError, MessageSignature, ParseError};

pub use project::{merge, project, project_all};
pub use text::{dump_local, parse_local, print_local};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalStmt {
    Send {
        to: Vec<String>,
        sig: MessageSignature,
    },
    Receive {
        from: String,
        sig: MessageSignature,
    },
    InternalChoice {
        branches: Vec<LocalBlock>,
    },
    ExternalChoice {
        branches: Vec<LocalBlock>,
    },
    Par {
        branches: Vec<LocalBlock>,
    },
    Rec {
        name: String,
        body: LocalBlock,
    },
    Continue {
        name: String,
    },
}

/// Sequential local statements; the empty block is `end`.
pub type LocalBlock = Vec<LocalStmt>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalProtocol {
    pub protocol_name: String,
    pub role: String,
    /// Every other role of the protocol, in declaration order.
    pub peers: Vec<String>,
    pub body: LocalBlock,
}

impl LocalProtocol {
    /// Roles this role actually exchanges messages with.
    pub fn used_peers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        walk_local(&self.body, &mut |s| match s {
            LocalStmt::Send { to, .. } => out.extend(to.iter().cloned()),
            LocalStmt::Receive { from, .. } => {
                out.insert(from.clone());
            }
            _ => {}
        });
        out
    }

    /// `(sender, label)` pairs this role may receive.
    pub fn receivable(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        walk_local(&self.body, &mut |s| {
            if let LocalStmt::Receive { from, sig } = s {
                out.insert((from.clone(), sig.label.clone()));
            }
        });
        out
    }
}

/// Pre-order visit of every local statement.
pub fn walk_local<'a>(b: &'a [LocalStmt], f: &mut dyn FnMut(&'a LocalStmt)) {
    for s in b {
        f(s);
        match s {
            LocalStmt::InternalChoice { branches }
            | LocalStmt::ExternalChoice { branches }
            | LocalStmt::Par { branches } => {
                for br in branches {
                    walk_local(br, f);
                }
            }
            LocalStmt::Rec { body, .. } => walk_local(body, f),
            _ => {}
        }
    }
}

/// True when the block contains at least one send or receive.
pub fn has_action(b: &[LocalStmt]) -> bool {
    let mut found = false;
    walk_local(b, &mut |s| {
        found |= matches!(s, LocalStmt::Send { .. } | LocalStmt::Receive { .. });
    });
    found
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("unmergeable choice for role `{role}`: {detail}")]
    UnmergeableChoice { role: String, detail: String },
    #[error("role `{role}` is not declared in `{protocol}`")]
    RoleAbsent { role: String, protocol: String },
    #[error("protocol must be expanded before projection: {0}")]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[cfg(test)]
mod tests;
