use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{ActionKey, Direction, MonitorFsm};
use crate::broker::SessionMessage;

/// What the runtime does with a violating message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Drop the message and report the violation.
    #[default]
    Block,
    /// Report the violation and deliver anyway.
    Warn,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "block" => Ok(Policy::Block),
            "warn" => Ok(Policy::Warn),
            other => Err(format!("unknown policy `{other}` (expected block or warn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationReason {
    UnexpectedLabel,
    WrongPeer,
    WrongDirection,
    PayloadTypeMismatch,
    SessionComplete,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}: {event} (expected {})", fmt_expected(expected))]
pub struct Violation {
    pub reason: ViolationReason,
    pub event: ActionKey,
    pub expected: Vec<ActionKey>,
}

fn fmt_expected(e: &[ActionKey]) -> String {
    if e.is_empty() {
        return "nothing".to_string();
    }
    let parts: Vec<String> = e.iter().map(|k| k.to_string()).collect();
    parts.join(" | ")
}

/// A cursor in one FSM, with one sub-cursor per region while at a fork.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Position {
    state: usize,
    regions: Vec<Position>,
}

fn settle(fsm: &MonitorFsm, state: usize) -> Position {
    match &fsm.states[state].fork {
        None => Position {
            state,
            regions: Vec::new(),
        },
        Some(f) => {
            let regions: Vec<Position> = f.regions.iter().map(|r| settle(r, r.initial)).collect();
            if f.regions.iter().zip(&regions).all(|(r, p)| finished(r, p)) {
                settle(fsm, f.join)
            } else {
                Position { state, regions }
            }
        }
    }
}

/// Accepting with nothing more to do.
fn finished(fsm: &MonitorFsm, p: &Position) -> bool {
    let st = &fsm.states[p.state];
    st.fork.is_none() && st.accepting && st.edges.is_empty()
}

fn complete(fsm: &MonitorFsm, p: &Position) -> bool {
    match &fsm.states[p.state].fork {
        None => fsm.states[p.state].accepting,
        Some(f) => {
            f.regions
                .iter()
                .zip(&p.regions)
                .all(|(r, rp)| complete(r, rp))
                && complete(fsm, &settle(fsm, f.join))
        }
    }
}

fn enabled(fsm: &MonitorFsm, p: &Position, out: &mut Vec<ActionKey>) {
    let st = &fsm.states[p.state];
    out.extend(st.edges.iter().map(|e| e.key.clone()));
    if let Some(f) = &st.fork {
        for (r, rp) in f.regions.iter().zip(&p.regions) {
            enabled(r, rp, out);
        }
        if f.regions
            .iter()
            .zip(&p.regions)
            .all(|(r, rp)| complete(r, rp))
        {
            enabled(fsm, &settle(fsm, f.join), out);
        }
    }
}

fn step(fsm: &MonitorFsm, p: &Position, key: &ActionKey) -> Option<Position> {
    let st = &fsm.states[p.state];
    if let Some(target) = fsm.step(p.state, key) {
        return Some(settle(fsm, target));
    }
    let f = st.fork.as_ref()?;
    for (i, (r, rp)) in f.regions.iter().zip(&p.regions).enumerate() {
        if let Some(next) = step(r, rp, key) {
            let mut regions = p.regions.clone();
            regions[i] = next;
            if f.regions
                .iter()
                .zip(&regions)
                .all(|(r, rp)| finished(r, rp))
            {
                return Some(settle(fsm, f.join));
            }
            return Some(Position {
                state: p.state,
                regions,
            });
        }
    }
    if f.regions
        .iter()
        .zip(&p.regions)
        .all(|(r, rp)| complete(r, rp))
    {
        return step(fsm, &settle(fsm, f.join), key);
    }
    None
}

/// Per-session monitor for one role.
#[derive(Debug, Clone)]
pub struct MonitorState {
    fsm: Arc<MonitorFsm>,
    pos: Position,
    pub policy: Policy,
}

impl MonitorState {
    pub fn new(fsm: Arc<MonitorFsm>) -> Self {
        Self::with_policy(fsm, Policy::Block)
    }

    pub fn with_policy(fsm: Arc<MonitorFsm>, policy: Policy) -> Self {
        let pos = settle(&fsm, fsm.initial);
        MonitorState { fsm, pos, policy }
    }

    pub fn fsm(&self) -> &Arc<MonitorFsm> {
        &self.fsm
    }

    /// Top-level state id.
    pub fn cursor(&self) -> usize {
        self.pos.state
    }

    /// Number of parallel regions currently in flight, at any depth.
    pub fn active_regions(&self) -> usize {
        fn count(p: &Position) -> usize {
            p.regions.len() + p.regions.iter().map(count).sum::<usize>()
        }
        count(&self.pos)
    }

    /// Checks a message event. The peer is the target for sends and the
    /// sender for receives.
    pub fn check(&mut self, direction: Direction, msg: &SessionMessage) -> Result<(), Violation> {
        let peer = match direction {
            Direction::Send => &msg.target_role,
            Direction::Receive => &msg.sender_role,
        };
        self.check_key(&ActionKey {
            direction,
            peer: peer.clone(),
            label: msg.label.clone(),
            payload: msg.payload_sorts(),
        })
    }

    /// Advances on `key`, or leaves the state untouched and reports why not.
    pub fn check_key(&mut self, key: &ActionKey) -> Result<(), Violation> {
        if let Some(next) = step(&self.fsm, &self.pos, key) {
            self.pos = next;
            return Ok(());
        }
        let expected = self.expected();
        Err(Violation {
            reason: classify(key, &expected, self.is_complete()),
            event: key.clone(),
            expected,
        })
    }

    /// Transitions enabled right now.
    pub fn expected(&self) -> Vec<ActionKey> {
        let mut out = Vec::new();
        enabled(&self.fsm, &self.pos, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// True at an accepting state with no parallel region mid-flight.
    pub fn is_complete(&self) -> bool {
        complete(&self.fsm, &self.pos)
    }
}

fn classify(key: &ActionKey, expected: &[ActionKey], complete: bool) -> ViolationReason {
    if expected.is_empty() && complete {
        return ViolationReason::SessionComplete;
    }
    let same = |e: &&ActionKey| e.label == key.label;
    if expected
        .iter()
        .filter(same)
        .any(|e| e.direction == key.direction && e.peer == key.peer)
    {
        ViolationReason::PayloadTypeMismatch
    } else if expected
        .iter()
        .filter(same)
        .any(|e| e.direction == key.direction)
    {
        ViolationReason::WrongPeer
    } else if expected.iter().any(|e| same(&e)) {
        ViolationReason::WrongDirection
    } else {
        ViolationReason::UnexpectedLabel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broker::Value;
    use crate::monitor::build_fsm;
    use crate::projection::project;
    use crate::scribble::{parse_global, Sort};

    fn monitor(src: &str, role: &str) -> MonitorState {
        let lp = project(&parse_global(src).unwrap(), role).unwrap();
        MonitorState::new(Arc::new(build_fsm(&lp).unwrap()))
    }

    const FLAT: &str = "global protocol FlatPingPong(role C, role S) {
        ping(str) from C to S; pong(str) from S to C; }";

    fn msg(from: &str, to: &str, label: &str, payload: Vec<Value>) -> SessionMessage {
        SessionMessage::new("p", from, to, label, payload)
    }

    #[test]
    fn flat_pingpong_walk() {
        let mut m = monitor(FLAT, "C");
        assert!(!m.is_complete());
        m.check(Direction::Send, &msg("C", "S", "ping", vec!["hi".into()]))
            .unwrap();
        assert_eq!(m.cursor(), 1);
        m.check(
            Direction::Receive,
            &msg("S", "C", "pong", vec!["ho".into()]),
        )
        .unwrap();
        assert!(m.is_complete());
        let v = m
            .check(Direction::Send, &msg("C", "S", "ping", vec!["hi".into()]))
            .unwrap_err();
        assert_eq!(v.reason, ViolationReason::SessionComplete);
    }

    #[test]
    fn violation_reasons() {
        let mut m = monitor(FLAT, "C");
        let cases = [
            (
                Direction::Receive,
                "S",
                "pong",
                Sort::Str,
                ViolationReason::UnexpectedLabel,
            ),
            (
                Direction::Send,
                "X",
                "ping",
                Sort::Str,
                ViolationReason::WrongPeer,
            ),
            (
                Direction::Receive,
                "S",
                "ping",
                Sort::Str,
                ViolationReason::WrongDirection,
            ),
            (
                Direction::Send,
                "S",
                "ping",
                Sort::Int,
                ViolationReason::PayloadTypeMismatch,
            ),
        ];
        for (dir, peer, label, sort, reason) in cases {
            let key = ActionKey {
                direction: dir,
                peer: peer.into(),
                label: label.into(),
                payload: vec![sort],
            };
            let v = m.check_key(&key).unwrap_err();
            assert_eq!(v.reason, reason, "{key}");
            assert_eq!(m.cursor(), 0);
            assert_eq!(
                v.expected,
                vec![ActionKey::send("S", "ping", vec![Sort::Str])]
            );
        }
    }

    #[test]
    fn int_is_not_real() {
        let src = "global protocol P(role A, role B) { x(real) from A to B; }";
        let mut m = monitor(src, "A");
        let v = m
            .check(Direction::Send, &msg("A", "B", "x", vec![Value::Int(1)]))
            .unwrap_err();
        assert_eq!(v.reason, ViolationReason::PayloadTypeMismatch);
    }

    #[test]
    fn big_sink_joins_after_both_dones() {
        let src = "global protocol Big(role A, role B, role Sink as S) {
            par { ping() from A to B; pong() from B to A; done() from A to S; }
            and { ping() from B to A; pong() from A to B; done() from B to S; }
            done() from S to A; done() from S to B; }";
        let mut m = monitor(src, "S");
        assert_eq!(m.active_regions(), 2);
        m.check_key(&ActionKey::receive("A", "done", vec![]))
            .unwrap();
        assert!(!m.is_complete());
        let v = m
            .check_key(&ActionKey::send("A", "done", vec![]))
            .unwrap_err();
        assert_eq!(v.reason, ViolationReason::WrongDirection);
        m.check_key(&ActionKey::receive("B", "done", vec![]))
            .unwrap();
        assert_eq!(m.active_regions(), 0);
        m.check_key(&ActionKey::send("A", "done", vec![])).unwrap();
        m.check_key(&ActionKey::send("B", "done", vec![])).unwrap();
        assert!(m.is_complete());
    }

    #[test]
    fn policy_parses() {
        assert_eq!("WARN".parse::<Policy>().unwrap(), Policy::Warn);
        assert!("drop".parse::<Policy>().is_err());
    }
}
