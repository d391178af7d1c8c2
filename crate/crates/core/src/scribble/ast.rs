//! Global protocol syntax tree.
//!
//! Protocol bodies are blocks: ordered statement lists, where each statement
//! runs after its predecessor completes. A `par` statement followed by more
//! statements therefore expresses a join: the tail runs once every branch is
//! done. The empty block is `end`.

use std::collections::BTreeMap;
use std::fmt;

/// Payload sorts. The set is closed; anything else is a syntax error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Str,
    Int,
    Real,
    Bool,
    Unit,
}

impl Sort {
    pub const ALL: [Sort; 5] = [Sort::Str, Sort::Int, Sort::Real, Sort::Bool, Sort::Unit];

    pub fn keyword(self) -> &'static str {
        match self {
            Sort::Str => "str",
            Sort::Int => "int",
            Sort::Real => "real",
            Sort::Bool => "bool",
            Sort::Unit => "unit",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Sort> {
        Sort::ALL.into_iter().find(|sort| sort.keyword() == s)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// `label(T1, .., Tn)`. The label may be empty (`(int) from S to B;`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageSignature {
    pub label: String,
    pub payload: Vec<Sort>,
}

impl MessageSignature {
    pub fn new(label: impl Into<String>, payload: Vec<Sort>) -> Self {
        MessageSignature {
            label: label.into(),
            payload,
        }
    }
}

impl fmt::Display for MessageSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.label)?;
        for (i, s) in self.payload.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Integer expressions over symbolic bounds and index variables: `N`, `N-1`, `i+1`, `3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(i64),
    Sym(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn sym(s: impl Into<String>) -> Expr {
        Expr::Sym(s.into())
    }

    /// Evaluates under `env`; returns the first unbound symbol on failure.
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<i64, String> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Sym(s) => env.get(s).copied().ok_or_else(|| s.clone()),
            Expr::Add(a, b) => Ok(a.eval(env)? + b.eval(env)?),
            Expr::Sub(a, b) => Ok(a.eval(env)? - b.eval(env)?),
        }
    }

    pub fn symbols(&self, out: &mut Vec<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Sym(s) => {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Add(a, b) => write!(f, "{a}+{b}"),
            Expr::Sub(a, b) => write!(f, "{a}-{b}"),
        }
    }
}

/// `[i:1..N]` on a branch, or on a sender role for indexed iteration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexBinder {
    pub var: String,
    pub lo: Expr,
    pub hi: Expr,
}

impl fmt::Display for IndexBinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}..{}", self.var, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RoleIndex {
    /// `W[i+1]`, `W[3]`
    Single(Expr),
    /// `S[1..N]`: multicast in receiver position, gather in sender position.
    Range(Expr, Expr),
    /// `W[i:1..N-1]`: sender-side iteration, unfolds into a sequence.
    Bound(IndexBinder),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoleRef {
    pub base: String,
    pub index: Option<RoleIndex>,
}

impl RoleRef {
    pub fn plain(name: impl Into<String>) -> Self {
        RoleRef {
            base: name.into(),
            index: None,
        }
    }

    pub fn is_plain(&self) -> bool {
        self.index.is_none()
    }
}

impl fmt::Display for RoleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        match &self.index {
            None => Ok(()),
            Some(RoleIndex::Single(e)) => write!(f, "[{e}]"),
            Some(RoleIndex::Range(lo, hi)) => write!(f, "[{lo}..{hi}]"),
            Some(RoleIndex::Bound(b)) => write!(f, "[{b}]"),
        }
    }
}

/// Actual role argument of a subprotocol call.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RoleArg {
    /// A role active at the call site, optionally annotated with the callee's parameter name.
    Existing {
        role: RoleRef,
        as_name: Option<String>,
    },
    /// A fresh participant of the given role type.
    New { role_type: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub binder: Option<IndexBinder>,
    pub body: Block,
}

impl Branch {
    pub fn new(body: Block) -> Self {
        Branch { binder: None, body }
    }
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Interaction {
        sig: MessageSignature,
        from: RoleRef,
        to: Vec<RoleRef>,
    },
    Choice {
        at: RoleRef,
        branches: Vec<Branch>,
    },
    Par {
        branches: Vec<Branch>,
    },
    Rec {
        name: String,
        body: Block,
    },
    Continue {
        name: String,
    },
    Do {
        protocol: String,
        args: Vec<RoleArg>,
    },
}

impl Stmt {
    pub fn msg(label: &str, payload: Vec<Sort>, from: &str, to: &[&str]) -> Stmt {
        Stmt::Interaction {
            sig: MessageSignature::new(label, payload),
            from: RoleRef::plain(from),
            to: to.iter().map(|r| RoleRef::plain(*r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoleDecl {
    pub name: String,
    /// `role W[lo..hi]`
    pub bounds: Option<(Expr, Expr)>,
    /// `role Arbiter as A`
    pub alias: Option<String>,
    /// For roles produced by expansion: the group or role type they instantiate.
    pub family: Option<String>,
    pub index: Option<i64>,
}

impl RoleDecl {
    pub fn new(name: impl Into<String>) -> Self {
        RoleDecl {
            name: name.into(),
            bounds: None,
            alias: None,
            family: None,
            index: None,
        }
    }

    /// The name the rest of the toolchain uses: the alias when present.
    pub fn canonical(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }

    pub fn is_group(&self) -> bool {
        self.bounds.is_some()
    }

    /// Group or role type this role belongs to, or its own name.
    pub fn family_name(&self) -> &str {
        self.family.as_deref().unwrap_or_else(|| self.canonical())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalProtocol {
    pub name: String,
    pub roles: Vec<RoleDecl>,
    pub body: Block,
    /// Other protocols defined in the same source, callable from `body`.
    pub subprotocols: BTreeMap<String, GlobalProtocol>,
}

impl GlobalProtocol {
    /// Canonical role names in declaration order.
    pub fn role_names(&self) -> Vec<String> {
        self.roles
            .iter()
            .map(|r| r.canonical().to_string())
            .collect()
    }

    /// Resolves a declared name or alias to its declaration.
    pub fn role(&self, name: &str) -> Option<&RoleDecl> {
        self.roles
            .iter()
            .find(|r| r.canonical() == name || r.name == name)
    }

    pub fn has_role(&self, name: &str) -> bool {
        self.role(name).is_some()
    }

    /// True when the protocol uses no group roles, indices or subprotocol calls.
    pub fn is_concrete(&self) -> bool {
        self.roles.iter().all(|r| !r.is_group()) && block_is_concrete(&self.body)
    }
}

fn block_is_concrete(block: &Block) -> bool {
    block.iter().all(|s| match s {
        Stmt::Interaction { from, to, .. } => from.is_plain() && to.iter().all(RoleRef::is_plain),
        Stmt::Choice { at, branches } => {
            at.is_plain()
                && branches
                    .iter()
                    .all(|b| b.binder.is_none() && block_is_concrete(&b.body))
        }
        Stmt::Par { branches } => branches
            .iter()
            .all(|b| b.binder.is_none() && block_is_concrete(&b.body)),
        Stmt::Rec { body, .. } => block_is_concrete(body),
        Stmt::Continue { .. } => true,
        Stmt::Do { .. } => false,
    })
}

/// Visits every statement in a block, depth-first, pre-order.
pub fn walk_block<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in block {
        f(stmt);
        match stmt {
            Stmt::Choice { branches, .. } | Stmt::Par { branches } => {
                for b in branches {
                    walk_block(&b.body, f);
                }
            }
            Stmt::Rec { body, .. } => walk_block(body, f),
            _ => {}
        }
    }
}
