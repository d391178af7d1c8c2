//! Well-formedness rules.
//!
//! Structural rules (recursion scoping, guardedness, role and call
//! resolution) run on the protocol as written. Semantic rules (choice
//! distinguishability, mergeability, parallel disjointness) need concrete
//! roles, so they run on the expanded protocol.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::expand::{expand, Bindings, ExpandError};
use super::{Diagnostic, DiagnosticKind};
use crate::projection::{project, ProjectionError};

/// Checks `p` without bindings. Protocols whose indexed constructs need
/// symbolic bounds only get the structural rules; see [`check_with_bindings`].
pub fn check_wellformed(p: &GlobalProtocol) -> Vec<Diagnostic> {
    let mut out = structural(p);
    match expand(p, &Bindings::new()) {
        Ok(e) => out.extend(semantic(&e)),
        Err(ExpandError::UnboundSymbol { .. } | ExpandError::ExpansionBudgetExceeded { .. }) => {}
        Err(e) => out.push(Diagnostic::new(e.kind(), e.to_string())),
    }
    finish(out)
}

/// Checks `p` after expansion under `bindings`.
pub fn check_with_bindings(p: &GlobalProtocol, bindings: &Bindings) -> Vec<Diagnostic> {
    let mut out = structural(p);
    match expand(p, bindings) {
        Ok(e) => out.extend(semantic(&e)),
        Err(e) => out.push(Diagnostic::new(e.kind(), e.to_string())),
    }
    finish(out)
}

fn finish(mut out: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let mut seen = BTreeSet::new();
    out.retain(|d| seen.insert(d.clone()));
    out
}

fn structural(p: &GlobalProtocol) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut protos: BTreeMap<&str, &GlobalProtocol> = BTreeMap::new();
    protos.insert(&p.name, p);
    for s in p.subprotocols.values() {
        protos.insert(&s.name, s);
    }
    for proto in protos.values() {
        let mut names = BTreeSet::new();
        for d in &proto.roles {
            for n in std::iter::once(&d.name).chain(d.alias.iter()) {
                if !names.insert(n.as_str()) {
                    out.push(Diagnostic::new(
                        DiagnosticKind::DuplicateRole,
                        format!("role `{n}` declared twice in `{}`", proto.name),
                    ));
                }
            }
        }
        let mut sc = Structural {
            proto,
            protos: &protos,
            roles: names,
            recs: Vec::new(),
            par_depth: 0,
            out: &mut out,
        };
        sc.block(&proto.body);
    }
    out
}

struct RecFrame {
    name: String,
    guarded: bool,
    par_depth: usize,
}

struct Structural<'a, 'p> {
    proto: &'p GlobalProtocol,
    protos: &'a BTreeMap<&'p str, &'p GlobalProtocol>,
    roles: BTreeSet<&'p str>,
    recs: Vec<RecFrame>,
    par_depth: usize,
    out: &'a mut Vec<Diagnostic>,
}

impl Structural<'_, '_> {
    fn diag(&mut self, kind: DiagnosticKind, msg: String) {
        self.out.push(Diagnostic::new(
            kind,
            format!("{} (in `{}`)", msg, self.proto.name),
        ));
    }

    fn role(&mut self, r: &RoleRef) {
        if !self.roles.contains(r.base.as_str()) {
            self.diag(
                DiagnosticKind::UnknownRole,
                format!("role `{}` is not declared", r.base),
            );
        }
    }

    fn guard_all(&mut self) {
        for f in &mut self.recs {
            f.guarded = true;
        }
    }

    fn guards(&self) -> Vec<bool> {
        self.recs.iter().map(|f| f.guarded).collect()
    }

    fn set_guards(&mut self, g: &[bool]) {
        for (f, g) in self.recs.iter_mut().zip(g) {
            f.guarded = *g;
        }
    }

    fn block(&mut self, b: &Block) {
        for (i, s) in b.iter().enumerate() {
            self.stmt(s);
            if matches!(s, Stmt::Continue { .. }) && i + 1 < b.len() {
                self.diag(
                    DiagnosticKind::UnreachableAfterContinue,
                    format!("{} statement(s) after `{}`", b.len() - i - 1, stmt_head(s)),
                );
                break;
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Interaction { sig: _, from, to } => {
                self.role(from);
                for r in to {
                    self.role(r);
                    if r == from && from.index.is_none() {
                        self.diag(
                            DiagnosticKind::SelfInteraction,
                            format!("`{}` sends to itself", from.base),
                        );
                    }
                }
                self.guard_all();
            }
            Stmt::Choice { at, branches } => {
                self.role(at);
                let before = self.guards();
                let mut after = vec![true; before.len()];
                for b in branches {
                    self.set_guards(&before);
                    self.block(&b.body);
                    for (a, g) in after.iter_mut().zip(self.guards()) {
                        *a &= g;
                    }
                }
                self.set_guards(&after);
            }
            Stmt::Par { branches } => {
                let before = self.guards();
                let mut after = before.clone();
                self.par_depth += 1;
                for b in branches {
                    self.set_guards(&before);
                    self.block(&b.body);
                    for (a, g) in after.iter_mut().zip(self.guards()) {
                        *a |= g;
                    }
                }
                self.par_depth -= 1;
                self.set_guards(&after);
            }
            Stmt::Rec { name, body } => {
                self.recs.push(RecFrame {
                    name: name.clone(),
                    guarded: false,
                    par_depth: self.par_depth,
                });
                self.block(body);
                self.recs.pop();
            }
            Stmt::Continue { name } => match self.recs.iter().rposition(|f| f.name == *name) {
                None => self.diag(
                    DiagnosticKind::UnboundContinue,
                    format!("`continue {name}` has no enclosing `rec {name}`"),
                ),
                Some(i) => {
                    let (guarded, depth) = (self.recs[i].guarded, self.recs[i].par_depth);
                    if !guarded {
                        self.diag(
                            DiagnosticKind::UnguardedRecursion,
                            format!("`continue {name}` reached without an interaction"),
                        );
                    }
                    if depth < self.par_depth {
                        self.diag(
                            DiagnosticKind::ContinueInsidePar,
                            format!("`continue {name}` leaves a `par` branch"),
                        );
                    }
                }
            },
            Stmt::Do { protocol, args } => {
                for a in args {
                    if let RoleArg::Existing { role, .. } = a {
                        self.role(role);
                    }
                }
                match self.protos.get(protocol.as_str()) {
                    None => self.diag(
                        DiagnosticKind::UnknownSubprotocol,
                        format!("no protocol named `{protocol}`"),
                    ),
                    Some(callee) if callee.roles.len() != args.len() => self.diag(
                        DiagnosticKind::ArityMismatch,
                        format!(
                            "`{protocol}` takes {} roles, {} given",
                            callee.roles.len(),
                            args.len()
                        ),
                    ),
                    Some(_) => {}
                }
                self.guard_all();
            }
        }
    }
}

fn stmt_head(s: &Stmt) -> String {
    match s {
        Stmt::Continue { name } => format!("continue {name}"),
        _ => String::new(),
    }
}

/// A first interaction of a block: sender, receivers, label.
type First = (String, Vec<String>, String);

fn firsts<'a>(
    b: &'a [Stmt],
    recs: &mut BTreeMap<String, &'a Block>,
    visiting: &mut BTreeSet<String>,
) -> (Vec<First>, bool) {
    let mut acc = Vec::new();
    for s in b {
        let (f, may_skip) = stmt_firsts(s, recs, visiting);
        acc.extend(f);
        if !may_skip {
            return (acc, false);
        }
    }
    (acc, true)
}

fn stmt_firsts<'a>(
    s: &'a Stmt,
    recs: &mut BTreeMap<String, &'a Block>,
    visiting: &mut BTreeSet<String>,
) -> (Vec<First>, bool) {
    match s {
        Stmt::Interaction { sig, from, to } => (
            vec![(
                from.base.clone(),
                to.iter().map(|r| r.base.clone()).collect(),
                sig.label.clone(),
            )],
            false,
        ),
        Stmt::Choice { branches, .. } | Stmt::Par { branches } => {
            let is_choice = matches!(s, Stmt::Choice { .. });
            let mut acc = Vec::new();
            let mut skip = !is_choice;
            for b in branches {
                let (f, e) = firsts(&b.body, recs, visiting);
                acc.extend(f);
                if is_choice {
                    skip |= e;
                } else {
                    skip &= e;
                }
            }
            (acc, skip)
        }
        Stmt::Rec { name, body } => {
            let prev = recs.insert(name.clone(), body);
            let r = firsts(body, recs, visiting);
            match prev {
                Some(p) => recs.insert(name.clone(), p),
                None => recs.remove(name),
            };
            r
        }
        Stmt::Continue { name } => {
            if !visiting.insert(name.clone()) {
                return (Vec::new(), false);
            }
            let r = match recs.get(name).copied() {
                Some(body) => firsts(body, recs, visiting).0,
                None => Vec::new(),
            };
            visiting.remove(name);
            (r, false)
        }
        Stmt::Do { .. } => (Vec::new(), false),
    }
}

fn semantic(p: &GlobalProtocol) -> Vec<Diagnostic> {
    let mut out = structural(p);
    let mut recs = BTreeMap::new();
    choices(&p.body, &mut recs, &mut out);
    walk_block(&p.body, &mut |s| {
        if let Stmt::Par { branches } = s {
            par_conflicts(branches, &mut out);
        }
    });
    if out.is_empty() {
        for role in p.role_names() {
            match project(p, &role) {
                Ok(_) => {}
                Err(ProjectionError::UnmergeableChoice { role, detail }) => {
                    out.push(Diagnostic::new(
                        DiagnosticKind::UnmergeableChoice,
                        format!("choice cannot be merged for `{role}`: {detail}"),
                    ))
                }
                Err(e) => out.push(Diagnostic::new(DiagnosticKind::UnknownRole, e.to_string())),
            }
        }
    }
    out
}

fn choices<'a>(b: &'a [Stmt], recs: &mut BTreeMap<String, &'a Block>, out: &mut Vec<Diagnostic>) {
    for s in b {
        match s {
            Stmt::Choice { at, branches } => {
                let chooser = &at.base;
                let mut sent: Vec<BTreeSet<(String, String)>> = Vec::new();
                for (i, br) in branches.iter().enumerate() {
                    let (fs, may_skip) = firsts(&br.body, recs, &mut BTreeSet::new());
                    if fs.is_empty() && may_skip {
                        out.push(Diagnostic::new(
                            DiagnosticKind::ChooserNotSender,
                            format!(
                                "branch {} of the choice at `{chooser}` has no interaction",
                                i + 1
                            ),
                        ));
                    }
                    let mut keys = BTreeSet::new();
                    for (from, to, label) in fs {
                        if from != *chooser {
                            out.push(Diagnostic::new(
                                DiagnosticKind::ChooserNotSender,
                                format!(
                                    "branch {} of the choice at `{chooser}` starts with `{label}` sent by `{from}`",
                                    i + 1
                                ),
                            ));
                        }
                        for r in to {
                            keys.insert((r, label.clone()));
                        }
                    }
                    for (j, prev) in sent.iter().enumerate() {
                        if let Some((r, l)) = prev.intersection(&keys).next() {
                            out.push(Diagnostic::new(
                                DiagnosticKind::IndistinguishableBranches,
                                format!(
                                    "branches {} and {} of the choice at `{chooser}` both start with `{l}` to `{r}`",
                                    j + 1,
                                    i + 1
                                ),
                            ));
                        }
                    }
                    sent.push(keys);
                }
                for br in branches {
                    choices(&br.body, recs, out);
                }
            }
            Stmt::Par { branches } => {
                for br in branches {
                    choices(&br.body, recs, out);
                }
            }
            Stmt::Rec { name, body } => {
                let prev = recs.insert(name.clone(), body);
                choices(body, recs, out);
                match prev {
                    Some(p) => recs.insert(name.clone(), p),
                    None => recs.remove(name),
                };
            }
            _ => {}
        }
    }
}

/// (role, is_send, peer, label)
type Action = (String, bool, String, String);

fn actions(b: &Block) -> BTreeSet<Action> {
    let mut acc = BTreeSet::new();
    walk_block(b, &mut |s| {
        if let Stmt::Interaction { sig, from, to } = s {
            for r in to {
                acc.insert((from.base.clone(), true, r.base.clone(), sig.label.clone()));
                acc.insert((r.base.clone(), false, from.base.clone(), sig.label.clone()));
            }
        }
    });
    acc
}

fn par_conflicts(branches: &[Branch], out: &mut Vec<Diagnostic>) {
    let sets: Vec<_> = branches.iter().map(|b| actions(&b.body)).collect();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if let Some((role, send, peer, label)) = sets[i].intersection(&sets[j]).next() {
                let dir = if *send { "sends" } else { "receives" };
                out.push(Diagnostic::new(
                    DiagnosticKind::ParConflict,
                    format!(
                        "`{role}` {dir} `{label}` with `{peer}` in parallel branches {} and {}",
                        i + 1,
                        j + 1
                    ),
                ));
            }
        }
    }
}
