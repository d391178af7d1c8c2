use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::{ActionKey, Edge, Fork, FsmState, MonitorError, MonitorFsm};
use crate::projection::{LocalProtocol, LocalStmt};

/// Compiles a local protocol into a deterministic monitor.
pub fn build_fsm(lp: &LocalProtocol) -> Result<MonitorFsm, MonitorError> {
    compile(&lp.protocol_name, &lp.role, &lp.body)
}

fn compile(protocol: &str, role: &str, body: &[LocalStmt]) -> Result<MonitorFsm, MonitorError> {
    let mut b = Builder {
        protocol,
        role,
        nodes: Vec::new(),
    };
    let end = b.push(Node::Real(Raw {
        accepting: true,
        ..Raw::default()
    }));
    let entry = b.block(body, end, &BTreeMap::new())?;
    b.finish(entry)
}

#[derive(Default)]
struct Raw {
    edges: Vec<(ActionKey, usize)>,
    accepting: bool,
    fork: Option<(Vec<Arc<MonitorFsm>>, usize)>,
}

enum Node {
    Real(Raw),
    Eps(Vec<usize>),
}

struct Builder<'a> {
    protocol: &'a str,
    role: &'a str,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn edge(&mut self, key: ActionKey, target: usize) -> usize {
        self.push(Node::Real(Raw {
            edges: vec![(key, target)],
            ..Raw::default()
        }))
    }

    fn nondet(&self, detail: String) -> MonitorError {
        MonitorError::NondeterministicProtocol {
            role: self.role.to_string(),
            detail,
        }
    }

    /// Compiles `b` so that it continues at node `k`; returns its entry node.
    fn block(
        &mut self,
        b: &[LocalStmt],
        k: usize,
        env: &BTreeMap<String, usize>,
    ) -> Result<usize, MonitorError> {
        let mut cur = k;
        for s in b.iter().rev() {
            cur = self.stmt(s, cur, env)?;
        }
        Ok(cur)
    }

    fn stmt(
        &mut self,
        s: &LocalStmt,
        k: usize,
        env: &BTreeMap<String, usize>,
    ) -> Result<usize, MonitorError> {
        Ok(match s {
            LocalStmt::Send { to, sig } => {
                let mut cur = k;
                for peer in to.iter().rev() {
                    cur = self.edge(ActionKey::send(peer, &sig.label, sig.payload.clone()), cur);
                }
                cur
            }
            LocalStmt::Receive { from, sig } => {
                self.edge(ActionKey::receive(from, &sig.label, sig.payload.clone()), k)
            }
            LocalStmt::InternalChoice { branches } | LocalStmt::ExternalChoice { branches } => {
                let entries = branches
                    .iter()
                    .map(|br| self.block(br, k, env))
                    .collect::<Result<Vec<_>, _>>()?;
                self.push(Node::Eps(entries))
            }
            LocalStmt::Par { branches } => {
                let regions = branches
                    .iter()
                    .map(|br| compile(self.protocol, self.role, br).map(Arc::new))
                    .collect::<Result<Vec<_>, _>>()?;
                self.push(Node::Real(Raw {
                    fork: Some((regions, k)),
                    ..Raw::default()
                }))
            }
            LocalStmt::Rec { name, body } => {
                let p = self.push(Node::Eps(Vec::new()));
                let mut inner = env.clone();
                inner.insert(name.clone(), p);
                let entry = self.block(body, k, &inner)?;
                self.nodes[p] = Node::Eps(vec![entry]);
                p
            }
            // Unbound labels are rejected by well-formedness; treat them as end.
            LocalStmt::Continue { name } => env.get(name).copied().unwrap_or(k),
        })
    }

    /// Real nodes reachable from `n` through epsilon links.
    fn closure(&self, n: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            match &self.nodes[x] {
                Node::Real(_) => {
                    out.insert(x);
                }
                Node::Eps(next) => stack.extend(next.iter().rev()),
            }
        }
        out
    }

    /// Merges epsilon closures into single states, checks determinism,
    /// drops unreachable states and renumbers in pre-order.
    fn finish(self, entry: usize) -> Result<MonitorFsm, MonitorError> {
        let mut merged: Vec<FsmState> = Vec::new();
        let mut ids: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut pending: Vec<BTreeSet<usize>> = Vec::new();
        let mut intern = |set: BTreeSet<usize>,
                          merged: &mut Vec<FsmState>,
                          pending: &mut Vec<BTreeSet<usize>>|
         -> usize {
            *ids.entry(set.clone()).or_insert_with(|| {
                merged.push(FsmState::default());
                pending.push(set);
                merged.len() - 1
            })
        };
        let initial = intern(self.closure(entry), &mut merged, &mut pending);
        let mut next = 0;
        while next < pending.len() {
            let set = pending[next].clone();
            let mut state = FsmState::default();
            let forks = set
                .iter()
                .filter(|&&n| matches!(&self.nodes[n], Node::Real(r) if r.fork.is_some()))
                .count();
            if forks > 0 && set.len() > 1 {
                return Err(self.nondet(
                    "a parallel block is offered as an alternative to other actions".into(),
                ));
            }
            for &n in &set {
                let Node::Real(raw) = &self.nodes[n] else {
                    unreachable!("closure holds real nodes only")
                };
                state.accepting |= raw.accepting;
                if let Some((regions, join)) = &raw.fork {
                    let join = intern(self.closure(*join), &mut merged, &mut pending);
                    state.fork = Some(Fork {
                        regions: regions.clone(),
                        join,
                    });
                }
                for (key, target) in &raw.edges {
                    let target = intern(self.closure(*target), &mut merged, &mut pending);
                    if let Some(clash) = state.edges.iter().find(|e| {
                        e.key.direction == key.direction
                            && e.key.peer == key.peer
                            && e.key.label == key.label
                    }) {
                        if clash.key != *key || clash.target != target {
                            return Err(self.nondet(format!(
                                "two transitions for {} {} `{}`",
                                key.direction.keyword(),
                                key.peer,
                                key.label
                            )));
                        }
                        continue;
                    }
                    state.edges.push(Edge {
                        key: key.clone(),
                        target,
                    });
                }
            }
            merged[next] = state;
            next += 1;
        }
        Ok(renumber(self.protocol, self.role, merged, initial))
    }
}

fn renumber(protocol: &str, role: &str, states: Vec<FsmState>, initial: usize) -> MonitorFsm {
    let mut order = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut stack = vec![initial];
    while let Some(s) = stack.pop() {
        if index.contains_key(&s) {
            continue;
        }
        index.insert(s, order.len());
        order.push(s);
        let st = &states[s];
        if let Some(f) = &st.fork {
            stack.push(f.join);
        }
        stack.extend(st.edges.iter().rev().map(|e| e.target));
    }
    let out = order
        .iter()
        .map(|&old| {
            let st = &states[old];
            FsmState {
                edges: st
                    .edges
                    .iter()
                    .map(|e| Edge {
                        key: e.key.clone(),
                        target: index[&e.target],
                    })
                    .collect(),
                accepting: st.accepting,
                fork: st.fork.as_ref().map(|f| Fork {
                    regions: f.regions.clone(),
                    join: index[&f.join],
                }),
            }
        })
        .collect();
    MonitorFsm {
        protocol: protocol.to_string(),
        role: role.to_string(),
        initial: 0,
        states: out,
    }
}
