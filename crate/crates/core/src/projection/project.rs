use std::borrow::Cow;
use std::collections::BTreeSet;

use super::{has_action, LocalBlock, LocalProtocol, LocalStmt, ProjectionError};
use crate::scribble::{expand, Bindings, Block, GlobalProtocol, Stmt};

/// Projects `p` onto `role`. Protocols that still use extensions are expanded
/// with empty bindings first.
pub fn project(p: &GlobalProtocol, role: &str) -> Result<LocalProtocol, ProjectionError> {
    let p: Cow<'_, GlobalProtocol> = if p.is_concrete() && p.subprotocols.is_empty() {
        Cow::Borrowed(p)
    } else {
        Cow::Owned(expand(p, &Bindings::new())?)
    };
    let decl = p.role(role).ok_or_else(|| ProjectionError::RoleAbsent {
        role: role.to_string(),
        protocol: p.name.clone(),
    })?;
    let me = decl.canonical().to_string();
    let peers = p.role_names().into_iter().filter(|r| *r != me).collect();
    let pr = Projector { role: &me };
    let body = pr.block(&p.body, &BTreeSet::new())?;
    Ok(LocalProtocol {
        protocol_name: p.name.clone(),
        role: me,
        peers,
        body,
    })
}

/// Projects every declared role, in declaration order.
pub fn project_all(p: &GlobalProtocol) -> Result<Vec<LocalProtocol>, ProjectionError> {
    p.role_names().iter().map(|r| project(p, r)).collect()
}

struct Projector<'r> {
    role: &'r str,
}

impl Projector<'_> {
    fn unmergeable(&self, detail: String) -> ProjectionError {
        ProjectionError::UnmergeableChoice {
            role: self.role.to_string(),
            detail,
        }
    }

    /// `fresh` holds the recursion labels entered on this path with no
    /// action of this role since their entry.
    fn block(&self, b: &Block, fresh: &BTreeSet<String>) -> Result<LocalBlock, ProjectionError> {
        let mut fresh = fresh.clone();
        let mut out = Vec::new();
        for s in b {
            let piece = self.stmt(s, &fresh)?;
            if has_action(&piece) {
                fresh.clear();
            }
            out.extend(piece);
        }
        Ok(out)
    }

    fn stmt(&self, s: &Stmt, fresh: &BTreeSet<String>) -> Result<LocalBlock, ProjectionError> {
        Ok(match s {
            Stmt::Interaction { sig, from, to } => {
                if from.base == self.role {
                    vec![LocalStmt::Send {
                        to: to.iter().map(|r| r.base.clone()).collect(),
                        sig: sig.clone(),
                    }]
                } else if to.iter().any(|r| r.base == self.role) {
                    vec![LocalStmt::Receive {
                        from: from.base.clone(),
                        sig: sig.clone(),
                    }]
                } else {
                    Vec::new()
                }
            }
            Stmt::Choice { at, branches } => {
                let mut projs = branches
                    .iter()
                    .map(|b| self.block(&b.body, fresh))
                    .collect::<Result<Vec<_>, _>>()?;
                if at.base == self.role {
                    return Ok(vec![LocalStmt::InternalChoice { branches: projs }]);
                }
                let idle = |b: &LocalBlock| matches!(b.as_slice(), [LocalStmt::Continue { name }] if fresh.contains(name));
                projs.retain(|b| !idle(b));
                if projs.is_empty() {
                    return Ok(Vec::new());
                }
                let mut acc = projs.remove(0);
                for b in projs {
                    acc = merge_inner(&acc, &b).map_err(|d| self.unmergeable(d))?;
                }
                acc
            }
            Stmt::Par { branches } => {
                let mut projs = branches
                    .iter()
                    .map(|b| self.block(&b.body, &BTreeSet::new()))
                    .collect::<Result<Vec<_>, _>>()?;
                projs.retain(|b| !b.is_empty());
                match projs.len() {
                    0 => Vec::new(),
                    1 => projs.pop().unwrap(),
                    _ => vec![LocalStmt::Par { branches: projs }],
                }
            }
            Stmt::Rec { name, body } => {
                let mut inner = fresh.clone();
                inner.insert(name.clone());
                let body = self.block(body, &inner)?;
                if has_action(&body) {
                    vec![LocalStmt::Rec {
                        name: name.clone(),
                        body,
                    }]
                } else {
                    Vec::new()
                }
            }
            Stmt::Continue { name } => vec![LocalStmt::Continue { name: name.clone() }],
            Stmt::Do { protocol, .. } => {
                return Err(ProjectionError::Expand(
                    crate::scribble::ExpandError::UnknownSubprotocol {
                        name: protocol.clone(),
                    },
                ))
            }
        })
    }
}

/// Merges the projections of two sibling choice branches.
///
/// Equal branches merge to themselves; receive-rooted branches with disjoint
/// `(sender, label)` heads merge into one external choice.
pub fn merge(a: &LocalBlock, b: &LocalBlock) -> Result<LocalBlock, ProjectionError> {
    merge_inner(a, b).map_err(|detail| ProjectionError::UnmergeableChoice {
        role: String::new(),
        detail,
    })
}

fn merge_inner(a: &LocalBlock, b: &LocalBlock) -> Result<LocalBlock, String> {
    if a == b {
        return Ok(a.clone());
    }
    let mut branches: Vec<(LocalBlock, BTreeSet<(String, String)>)> = Vec::new();
    for side in [a, b] {
        for br in flatten(side) {
            if branches.iter().any(|(x, _)| *x == br) {
                continue;
            }
            let keys = heads(&br).ok_or_else(|| describe(&br))?;
            if let Some((from, label)) = branches
                .iter()
                .find_map(|(_, k)| k.intersection(&keys).next().cloned())
            {
                return Err(format!(
                    "two branches start by receiving `{label}` from `{from}`"
                ));
            }
            branches.push((br, keys));
        }
    }
    Ok(vec![LocalStmt::ExternalChoice {
        branches: branches.into_iter().map(|(b, _)| b).collect(),
    }])
}

fn describe(b: &LocalBlock) -> String {
    match b.first() {
        None => "a branch has no action while another does".to_string(),
        Some(LocalStmt::Send { sig, to }) => {
            format!(
                "a branch starts by sending `{}` to `{}`",
                sig.label,
                to.join(", ")
            )
        }
        Some(_) => "a branch does not start with a receive".to_string(),
    }
}

fn flatten(b: &LocalBlock) -> Vec<LocalBlock> {
    match b.as_slice() {
        [LocalStmt::ExternalChoice { branches }] => branches.clone(),
        _ => vec![b.clone()],
    }
}

/// Receive heads of a block, or `None` when it is not receive-rooted.
pub(super) fn heads(b: &[LocalStmt]) -> Option<BTreeSet<(String, String)>> {
    match b.first()? {
        LocalStmt::Receive { from, sig } => Some([(from.clone(), sig.label.clone())].into()),
        LocalStmt::ExternalChoice { branches } => {
            let mut acc = BTreeSet::new();
            for br in branches {
                acc.extend(heads(br)?);
            }
            Some(acc)
        }
        LocalStmt::Rec { body, .. } => heads(body),
        _ => None,
    }
}
