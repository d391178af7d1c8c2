//! Macro expansion of the indexed and subprotocol extensions into the core
//! fragment: plain roles, plain role references, no calls.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::*;
use super::DiagnosticKind;

/// Values for symbolic bounds (`N`, `K`, ...) and the subprotocol unfolding depth.
pub type Bindings = BTreeMap<String, i64>;

/// Binding name for the recursive-subprotocol unfolding depth.
pub const DEPTH_SYMBOL: &str = "depth";

const STATEMENT_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("unbound symbol `{symbol}`")]
    UnboundSymbol { symbol: String },
    #[error("expansion budget exceeded in `{protocol}`: {detail}")]
    ExpansionBudgetExceeded { protocol: String, detail: String },
    #[error("index {index} of `{role}` outside {lo}..{hi}")]
    IndexOutOfBounds {
        role: String,
        index: i64,
        lo: i64,
        hi: i64,
    },
    #[error("invalid bounds {lo}..{hi} for group role `{role}`")]
    InvalidBounds { role: String, lo: i64, hi: i64 },
    #[error("`{reference}` is not a single role")]
    NotSingleRole { reference: String },
    #[error("unknown role `{name}`")]
    UnknownRole { name: String },
    #[error("unknown subprotocol `{name}`")]
    UnknownSubprotocol { name: String },
    #[error("`{protocol}` takes {expected} roles, {found} given")]
    ArityMismatch {
        protocol: String,
        expected: usize,
        found: usize,
    },
    #[error("argument `as {found}` does not match parameter `{expected}` of `{protocol}`")]
    ParameterMismatch {
        protocol: String,
        expected: String,
        found: String,
    },
}

impl ExpandError {
    pub fn kind(&self) -> DiagnosticKind {
        match self {
            ExpandError::UnboundSymbol { .. } => DiagnosticKind::UnboundSymbol,
            ExpandError::ExpansionBudgetExceeded { .. } => DiagnosticKind::ExpansionBudgetExceeded,
            ExpandError::IndexOutOfBounds { .. }
            | ExpandError::InvalidBounds { .. }
            | ExpandError::NotSingleRole { .. } => DiagnosticKind::IndexOutOfBounds,
            ExpandError::UnknownRole { .. } => DiagnosticKind::UnknownRole,
            ExpandError::UnknownSubprotocol { .. } => DiagnosticKind::UnknownSubprotocol,
            ExpandError::ArityMismatch { .. } | ExpandError::ParameterMismatch { .. } => {
                DiagnosticKind::ArityMismatch
            }
        }
    }
}

/// Result of [`expand_traced`]: the expanded protocol plus the recursive calls
/// that were cut off at the unfolding depth.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub protocol: GlobalProtocol,
    pub truncated_calls: Vec<String>,
}

/// Expands `p` for concrete bindings. Already-concrete protocols come back unchanged.
pub fn expand(p: &GlobalProtocol, bindings: &Bindings) -> Result<GlobalProtocol, ExpandError> {
    expand_traced(p, bindings).map(|e| e.protocol)
}

pub fn expand_traced(p: &GlobalProtocol, bindings: &Bindings) -> Result<Expansion, ExpandError> {
    let mut protos: BTreeMap<&str, &GlobalProtocol> = BTreeMap::new();
    for sub in p.subprotocols.values() {
        protos.insert(&sub.name, sub);
    }
    protos.insert(&p.name, p);

    let mut ex = Expander {
        protos,
        depth: bindings.get(DEPTH_SYMBOL).copied(),
        stack: vec![p.name.clone()],
        fresh: BTreeMap::new(),
        new_roles: Vec::new(),
        truncated: Vec::new(),
        emitted: 0,
        globals: bindings.clone(),
    };

    let mut scope = Scope::new();
    let mut roles = Vec::new();
    for d in &p.roles {
        match &d.bounds {
            Some((lo, hi)) => {
                let lo = eval(lo, bindings)?;
                let hi = eval(hi, bindings)?;
                let base = d.canonical().to_string();
                if lo < 1 || hi < lo {
                    return Err(ExpandError::InvalidBounds { role: base, lo, hi });
                }
                for k in lo..=hi {
                    roles.push(RoleDecl {
                        family: Some(base.clone()),
                        index: Some(k),
                        ..RoleDecl::new(format!("{base}{k}"))
                    });
                }
                scope.bind(d, RoleBinding::Group { base, lo, hi });
            }
            None => {
                roles.push(RoleDecl {
                    family: d.family.clone(),
                    index: d.index,
                    ..RoleDecl::new(d.canonical())
                });
                scope.bind(d, RoleBinding::Single(d.canonical().to_string()));
            }
        }
    }

    let body = ex.block(&p.body, &scope, bindings)?;
    roles.append(&mut ex.new_roles);
    Ok(Expansion {
        protocol: GlobalProtocol {
            name: p.name.clone(),
            roles,
            body,
            subprotocols: BTreeMap::new(),
        },
        truncated_calls: ex.truncated,
    })
}

fn eval(e: &Expr, env: &Bindings) -> Result<i64, ExpandError> {
    e.eval(env)
        .map_err(|symbol| ExpandError::UnboundSymbol { symbol })
}

#[derive(Debug, Clone)]
enum RoleBinding {
    Single(String),
    Group { base: String, lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Default)]
struct Scope {
    roles: BTreeMap<String, RoleBinding>,
}

impl Scope {
    fn new() -> Self {
        Scope::default()
    }

    fn bind(&mut self, d: &RoleDecl, b: RoleBinding) {
        self.roles.insert(d.name.clone(), b.clone());
        if let Some(a) = &d.alias {
            self.roles.insert(a.clone(), b);
        }
    }

    fn resolve(&self, r: &RoleRef, env: &Bindings) -> Result<Vec<String>, ExpandError> {
        let binding = self
            .roles
            .get(&r.base)
            .ok_or_else(|| ExpandError::UnknownRole {
                name: r.base.clone(),
            })?;
        match binding {
            RoleBinding::Single(name) => match &r.index {
                None => Ok(vec![name.clone()]),
                Some(_) => Err(ExpandError::NotSingleRole {
                    reference: r.to_string(),
                }),
            },
            RoleBinding::Group { base, lo, hi } => {
                let member = |k: i64| {
                    if k < *lo || k > *hi {
                        Err(ExpandError::IndexOutOfBounds {
                            role: base.clone(),
                            index: k,
                            lo: *lo,
                            hi: *hi,
                        })
                    } else {
                        Ok(format!("{base}{k}"))
                    }
                };
                let (a, b) = match &r.index {
                    None => (*lo, *hi),
                    Some(RoleIndex::Single(e)) => {
                        let k = eval(e, env)?;
                        (k, k)
                    }
                    Some(RoleIndex::Range(x, y)) => (eval(x, env)?, eval(y, env)?),
                    Some(RoleIndex::Bound(bd)) => (eval(&bd.lo, env)?, eval(&bd.hi, env)?),
                };
                (a..=b).map(member).collect()
            }
        }
    }

    fn resolve_single(&self, r: &RoleRef, env: &Bindings) -> Result<String, ExpandError> {
        let mut v = self.resolve(r, env)?;
        if v.len() != 1 {
            return Err(ExpandError::NotSingleRole {
                reference: r.to_string(),
            });
        }
        Ok(v.pop().unwrap())
    }
}

struct Expander<'p> {
    protos: BTreeMap<&'p str, &'p GlobalProtocol>,
    depth: Option<i64>,
    stack: Vec<String>,
    fresh: BTreeMap<String, usize>,
    new_roles: Vec<RoleDecl>,
    truncated: Vec<String>,
    emitted: usize,
    globals: Bindings,
}

impl<'p> Expander<'p> {
    fn charge(&mut self, n: usize) -> Result<(), ExpandError> {
        self.emitted += n;
        if self.emitted > STATEMENT_BUDGET {
            return Err(ExpandError::ExpansionBudgetExceeded {
                protocol: self.stack.last().cloned().unwrap_or_default(),
                detail: format!("more than {STATEMENT_BUDGET} statements"),
            });
        }
        Ok(())
    }

    fn block(&mut self, b: &Block, scope: &Scope, env: &Bindings) -> Result<Block, ExpandError> {
        let mut out = Vec::with_capacity(b.len());
        for s in b {
            self.stmt(s, scope, env, &mut out)?;
        }
        Ok(out)
    }

    fn branches(
        &mut self,
        bs: &[Branch],
        scope: &Scope,
        env: &Bindings,
    ) -> Result<Vec<Branch>, ExpandError> {
        let mut out = Vec::new();
        for b in bs {
            match &b.binder {
                None => out.push(Branch::new(self.block(&b.body, scope, env)?)),
                Some(bd) => {
                    let (lo, hi) = (eval(&bd.lo, env)?, eval(&bd.hi, env)?);
                    for v in lo..=hi {
                        let mut inner = env.clone();
                        inner.insert(bd.var.clone(), v);
                        out.push(Branch::new(self.block(&b.body, scope, &inner)?));
                    }
                }
            }
        }
        Ok(out)
    }

    fn receivers(
        &self,
        to: &[RoleRef],
        scope: &Scope,
        env: &Bindings,
    ) -> Result<Vec<RoleRef>, ExpandError> {
        let mut out = Vec::new();
        for r in to {
            out.extend(scope.resolve(r, env)?.into_iter().map(RoleRef::plain));
        }
        Ok(out)
    }

    fn stmt(
        &mut self,
        s: &Stmt,
        scope: &Scope,
        env: &Bindings,
        out: &mut Block,
    ) -> Result<(), ExpandError> {
        self.charge(1)?;
        match s {
            Stmt::Interaction { sig, from, to } => {
                if let Some(RoleIndex::Bound(bd)) = &from.index {
                    let (lo, hi) = (eval(&bd.lo, env)?, eval(&bd.hi, env)?);
                    for v in lo..=hi {
                        let mut inner = env.clone();
                        inner.insert(bd.var.clone(), v);
                        let sender = RoleRef {
                            base: from.base.clone(),
                            index: Some(RoleIndex::Single(Expr::Sym(bd.var.clone()))),
                        };
                        out.push(Stmt::Interaction {
                            sig: sig.clone(),
                            from: RoleRef::plain(scope.resolve_single(&sender, &inner)?),
                            to: self.receivers(to, scope, &inner)?,
                        });
                    }
                    self.charge((hi - lo + 1).max(0) as usize)?;
                    return Ok(());
                }
                let senders = scope.resolve(from, env)?;
                let to = self.receivers(to, scope, env)?;
                let mut msgs: Vec<Stmt> = senders
                    .into_iter()
                    .map(|f| Stmt::Interaction {
                        sig: sig.clone(),
                        from: RoleRef::plain(f),
                        to: to.clone(),
                    })
                    .collect();
                if msgs.len() == 1 {
                    out.push(msgs.pop().unwrap());
                } else if !msgs.is_empty() {
                    out.push(Stmt::Par {
                        branches: msgs.into_iter().map(|m| Branch::new(vec![m])).collect(),
                    });
                }
            }
            Stmt::Choice { at, branches } => {
                let at = RoleRef::plain(scope.resolve_single(at, env)?);
                let branches = self.branches(branches, scope, env)?;
                out.push(Stmt::Choice { at, branches });
            }
            Stmt::Par { branches } => {
                let branches = self.branches(branches, scope, env)?;
                if !branches.is_empty() {
                    out.push(Stmt::Par { branches });
                }
            }
            Stmt::Rec { name, body } => {
                let body = self.block(body, scope, env)?;
                out.push(Stmt::Rec {
                    name: name.clone(),
                    body,
                });
            }
            Stmt::Continue { name } => out.push(Stmt::Continue { name: name.clone() }),
            Stmt::Do { protocol, args } => self.call(protocol, args, scope, env, out)?,
        }
        Ok(())
    }

    fn call(
        &mut self,
        protocol: &str,
        args: &[RoleArg],
        scope: &Scope,
        env: &Bindings,
        out: &mut Block,
    ) -> Result<(), ExpandError> {
        let callee = *self
            .protos
            .get(protocol)
            .ok_or_else(|| ExpandError::UnknownSubprotocol {
                name: protocol.to_string(),
            })?;
        if callee.roles.len() != args.len() {
            return Err(ExpandError::ArityMismatch {
                protocol: protocol.to_string(),
                expected: callee.roles.len(),
                found: args.len(),
            });
        }
        if self.stack.iter().any(|n| n == protocol) {
            let depth = self
                .depth
                .ok_or_else(|| ExpandError::ExpansionBudgetExceeded {
                    protocol: protocol.to_string(),
                    detail: format!("recursive call without a `{DEPTH_SYMBOL}` binding"),
                })?;
            if self.stack.len() as i64 > depth {
                log::debug!("call to {protocol} cut at depth {}", self.stack.len());
                self.truncated
                    .push(format!("{protocol} at depth {}", self.stack.len()));
                return Ok(());
            }
        }

        let mut inner = Scope::new();
        for (param, arg) in callee.roles.iter().zip(args) {
            if param.is_group() {
                return Err(ExpandError::ParameterMismatch {
                    protocol: protocol.to_string(),
                    expected: format!("single role for `{}`", param.name),
                    found: "group parameter".to_string(),
                });
            }
            let concrete = match arg {
                RoleArg::Existing { role, as_name } => {
                    if let Some(n) = as_name {
                        if *n != param.name && param.alias.as_ref() != Some(n) {
                            return Err(ExpandError::ParameterMismatch {
                                protocol: protocol.to_string(),
                                expected: param.canonical().to_string(),
                                found: n.clone(),
                            });
                        }
                    }
                    scope.resolve_single(role, env)?
                }
                RoleArg::New { role_type } => {
                    let k = self.fresh.entry(role_type.clone()).or_insert(0);
                    *k += 1;
                    let name = format!("{role_type}#{k}");
                    self.new_roles.push(RoleDecl {
                        family: Some(role_type.clone()),
                        index: Some(*k as i64),
                        ..RoleDecl::new(name.clone())
                    });
                    name
                }
            };
            inner.bind(param, RoleBinding::Single(concrete));
        }

        let globals = self.globals.clone();
        self.stack.push(protocol.to_string());
        let body = self.block(&callee.body, &inner, &globals);
        self.stack.pop();
        out.extend(body?);
        Ok(())
    }
}
