//! Shared test support: a generator of well-formed global protocols and an
//! interpreter that enumerates global traces directly from the syntax tree.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::rc::Rc;

use proptest::collection::vec;
use proptest::prelude::*;
use session_actors::monitor::ActionKey;
use session_actors::scribble::{
    Block, Branch, GlobalProtocol, MessageSignature, RoleDecl, RoleRef, Sort, Stmt,
};

pub const ROLES: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone)]
pub enum Raw {
    Msg(usize, usize, Vec<Sort>),
    Choice(usize, Vec<Vec<Raw>>),
    Par(Vec<Vec<Raw>>),
    Rec(Vec<Raw>, bool),
}

fn sort() -> impl Strategy<Value = Sort> {
    prop::sample::select(Sort::ALL.to_vec())
}

fn raw() -> impl Strategy<Value = Raw> {
    let leaf = (0..3usize, 1..4usize, vec(sort(), 0..3)).prop_map(|(f, m, p)| Raw::Msg(f, m, p));
    leaf.prop_recursive(3, 20, 3, |inner| {
        prop_oneof![
            3 => (0..3usize, 1..4usize, vec(sort(), 0..3)).prop_map(|(f, m, p)| Raw::Msg(f, m, p)),
            1 => (0..3usize, vec(vec(inner.clone(), 0..3), 2..4)).prop_map(|(a, b)| Raw::Choice(a, b)),
            1 => vec(vec(inner.clone(), 1..3), 2..3).prop_map(Raw::Par),
            1 => (vec(inner, 0..3), any::<bool>()).prop_map(|(b, c)| Raw::Rec(b, c)),
        ]
    })
}

/// Well-formed protocols over roles A, B and C.
pub fn protocol() -> impl Strategy<Value = GlobalProtocol> {
    vec(raw(), 1..5).prop_map(|raws| {
        let mut g = Fresh::default();
        GlobalProtocol {
            name: "Gen".into(),
            roles: ROLES.iter().map(|r| RoleDecl::new(*r)).collect(),
            body: g.block(&raws, true),
            subprotocols: Default::default(),
        }
    })
}

#[derive(Default)]
struct Fresh {
    labels: usize,
    recs: usize,
}

fn others(r: usize) -> [usize; 2] {
    match r {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

impl Fresh {
    fn msg(&mut self, from: usize, to: &[usize], payload: Vec<Sort>) -> Stmt {
        self.labels += 1;
        Stmt::Interaction {
            sig: MessageSignature::new(format!("m{}", self.labels), payload),
            from: RoleRef::plain(ROLES[from]),
            to: to.iter().map(|t| RoleRef::plain(ROLES[*t])).collect(),
        }
    }

    /// Loops without an exit are only generated where nothing follows them.
    fn block(&mut self, raws: &[Raw], tail: bool) -> Block {
        let mut out = Vec::new();
        for (i, r) in raws.iter().enumerate() {
            let tail = tail && i + 1 == raws.len();
            match r {
                Raw::Msg(f, mask, p) => {
                    let [x, y] = others(*f);
                    let to: Vec<usize> = [(1, x), (2, y)]
                        .into_iter()
                        .filter(|(bit, _)| mask & bit != 0)
                        .map(|(_, t)| t)
                        .collect();
                    out.push(self.msg(*f, &to, p.clone()));
                }
                Raw::Choice(at, branches) => {
                    let branches = branches
                        .iter()
                        .map(|b| {
                            let mut body = vec![self.msg(*at, &others(*at), vec![])];
                            body.extend(self.block(b, tail));
                            Branch::new(body)
                        })
                        .collect();
                    out.push(Stmt::Choice {
                        at: RoleRef::plain(ROLES[*at]),
                        branches,
                    });
                }
                Raw::Par(branches) => {
                    let branches = branches
                        .iter()
                        .map(|b| Branch::new(self.block(b, tail)))
                        .collect();
                    out.push(Stmt::Par { branches });
                }
                Raw::Rec(body, cont) => {
                    self.recs += 1;
                    let name = format!("L{}", self.recs);
                    let looping = *cont && tail;
                    let mut inner = vec![self.msg(0, &[1], vec![])];
                    inner.extend(self.block(body, tail && !looping));
                    if looping {
                        inner.push(Stmt::Continue { name: name.clone() });
                    }
                    out.push(Stmt::Rec { name, body: inner });
                    if looping {
                        break;
                    }
                }
            }
        }
        out
    }
}

/// One synchronous global step. A multicast takes one step per receiver, in
/// list order, so other parallel branches may interleave between them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub from: String,
    pub to: Vec<String>,
    pub sig: MessageSignature,
}

impl Event {
    /// The local actions of `role` in this interaction, in list order.
    pub fn keys_for(&self, role: &str) -> Vec<ActionKey> {
        let mut out = Vec::new();
        if self.from == role {
            for t in &self.to {
                out.push(ActionKey::send(
                    t,
                    &self.sig.label,
                    self.sig.payload.clone(),
                ));
            }
        }
        if self.to.iter().any(|t| t == role) {
            out.push(ActionKey::receive(
                &self.from,
                &self.sig.label,
                self.sig.payload.clone(),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Frame {
    Seq(Rc<Block>, usize, Env),
    Par(Vec<Term>),
}

/// Continuation stack; the active frame is last.
type Term = Vec<Frame>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
struct Env(Option<Rc<Scope>>);

#[derive(Debug, PartialEq, Eq, Hash)]
struct Scope {
    name: String,
    body: Rc<Block>,
    outer: Env,
    tail: Term,
}

impl Env {
    fn lookup(&self, name: &str) -> Option<Rc<Scope>> {
        let mut cur = self.0.clone();
        while let Some(s) = cur {
            if s.name == name {
                return Some(s);
            }
            cur = s.outer.0.clone();
        }
        None
    }
}

fn normalize(mut t: Term) -> Term {
    loop {
        match t.last_mut() {
            Some(Frame::Seq(b, i, _)) if *i >= b.len() => {
                t.pop();
            }
            Some(Frame::Par(parts)) => {
                for p in parts.iter_mut() {
                    *p = normalize(std::mem::take(p));
                }
                if parts.iter().all(Vec::is_empty) {
                    t.pop();
                } else {
                    return t;
                }
            }
            _ => return t,
        }
    }
}

fn with(mut t: Term, f: Frame) -> Term {
    t.push(f);
    normalize(t)
}

fn steps(t: &Term, fuel: usize) -> Vec<(Event, Term)> {
    let Some(top) = t.last() else {
        return Vec::new();
    };
    if fuel == 0 {
        return Vec::new();
    }
    let below = t[..t.len() - 1].to_vec();
    match top {
        Frame::Par(parts) => {
            let mut out = Vec::new();
            for (i, p) in parts.iter().enumerate() {
                for (ev, p2) in steps(p, fuel) {
                    let mut parts2 = parts.clone();
                    parts2[i] = normalize(p2);
                    out.push((ev, with(below.clone(), Frame::Par(parts2))));
                }
            }
            out
        }
        Frame::Seq(block, i, env) => {
            let rest = normalize({
                let mut r = below;
                r.push(Frame::Seq(block.clone(), i + 1, env.clone()));
                r
            });
            match &block[*i] {
                Stmt::Interaction { sig, from, to } => {
                    let ev = Event {
                        from: from.base.clone(),
                        to: vec![to[0].base.clone()],
                        sig: sig.clone(),
                    };
                    let next = if to.len() > 1 {
                        let remaining = Stmt::Interaction {
                            sig: sig.clone(),
                            from: from.clone(),
                            to: to[1..].to_vec(),
                        };
                        with(rest, Frame::Seq(Rc::new(vec![remaining]), 0, env.clone()))
                    } else {
                        rest
                    };
                    vec![(ev, next)]
                }
                Stmt::Choice { branches, .. } => branches
                    .iter()
                    .flat_map(|b| {
                        let t2 = with(
                            rest.clone(),
                            Frame::Seq(Rc::new(b.body.clone()), 0, env.clone()),
                        );
                        steps(&t2, fuel - 1)
                    })
                    .collect(),
                Stmt::Par { branches } => {
                    let parts = branches
                        .iter()
                        .map(|b| {
                            normalize(vec![Frame::Seq(Rc::new(b.body.clone()), 0, env.clone())])
                        })
                        .collect();
                    steps(&with(rest, Frame::Par(parts)), fuel - 1)
                }
                Stmt::Rec { name, body } => {
                    let body = Rc::new(body.clone());
                    let scope = Env(Some(Rc::new(Scope {
                        name: name.clone(),
                        body: body.clone(),
                        outer: env.clone(),
                        tail: rest.clone(),
                    })));
                    steps(&with(rest, Frame::Seq(body, 0, scope)), fuel - 1)
                }
                Stmt::Continue { name } => {
                    let s = env.lookup(name).expect("bound continue");
                    let again = with(
                        s.tail.clone(),
                        Frame::Seq(s.body.clone(), 0, Env(Some(s.clone()))),
                    );
                    steps(&again, fuel - 1)
                }
                Stmt::Do { .. } => panic!("unexpanded call"),
            }
        }
    }
}

/// Local traces of `role` up to `max_len` actions, read off the global
/// interleavings of `p`'s body.
pub fn restricted_traces(
    p: &GlobalProtocol,
    role: &str,
    max_len: usize,
) -> BTreeSet<Vec<ActionKey>> {
    let start = normalize(vec![Frame::Seq(Rc::new(p.body.clone()), 0, Env::default())]);
    let mut out = BTreeSet::new();
    out.insert(Vec::new());
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((start.clone(), Vec::new()));
    queue.push_back((start, Vec::<ActionKey>::new()));
    while let Some((t, tr)) = queue.pop_front() {
        for (ev, t2) in steps(&t, 64) {
            let mut tr2 = tr.clone();
            let mut full = false;
            for k in ev.keys_for(role) {
                if tr2.len() == max_len {
                    full = true;
                    break;
                }
                tr2.push(k);
                out.insert(tr2.clone());
            }
            if !full && tr2.len() < max_len && seen.insert((t2.clone(), tr2.clone())) {
                queue.push_back((t2, tr2));
            }
        }
    }
    out
}

/// Every interaction statement in `block`, at any depth.
pub fn interactions(block: &Block) -> Vec<Event> {
    let mut out = Vec::new();
    session_actors::scribble::walk_block(block, &mut |s| {
        if let Stmt::Interaction { sig, from, to } = s {
            out.push(Event {
                from: from.base.clone(),
                to: to.iter().map(|r| r.base.clone()).collect(),
                sig: sig.clone(),
            });
        }
    });
    out
}
