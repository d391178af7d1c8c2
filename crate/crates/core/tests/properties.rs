mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::collection::vec;
use proptest::prelude::*;
use session_actors::broker::{Broker, ExchangeKind, SessionMessage, Value};
use session_actors::monitor::{
    accepted_traces, build_fsm, parse_graph, write_graph, ActionKey, MonitorState,
};
use session_actors::parallel::{alphabet, oracle_check};
use session_actors::projection::{parse_local, print_local, project_all, LocalProtocol, LocalStmt};
use session_actors::scribble::{
    check_wellformed, expand, parse_global, pretty_print, Bindings, Sort,
};

use common::{interactions, protocol, restricted_traces};

fn locals(p: &session_actors::scribble::GlobalProtocol) -> Vec<LocalProtocol> {
    project_all(p).expect("generated protocols project")
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn generated_protocols_are_well_formed(p in protocol()) {
        let diags = check_wellformed(&p);
        prop_assert!(diags.is_empty(), "{diags:?}\n{}", pretty_print(&p));
    }

    #[test]
    fn print_then_parse_is_identity(p in protocol()) {
        let text = pretty_print(&p);
        prop_assert_eq!(parse_global(&text).unwrap(), p, "{}", text);
    }

    #[test]
    fn expand_is_identity_on_concrete_protocols(p in protocol()) {
        let once = expand(&p, &Bindings::new()).unwrap();
        prop_assert_eq!(&once, &p);
        prop_assert_eq!(expand(&once, &Bindings::new()).unwrap(), once);
    }

    #[test]
    fn local_text_round_trips(p in protocol()) {
        for lp in locals(&p) {
            let text = print_local(&lp);
            prop_assert_eq!(parse_local(&text).unwrap(), lp, "{}", text);
        }
    }

    #[test]
    fn interactions_land_in_exactly_the_right_locals(p in protocol()) {
        let mut sends = BTreeSet::new();
        let mut recvs = BTreeSet::new();
        for lp in locals(&p) {
            session_actors::projection::walk_local(&lp.body, &mut |s| match s {
                LocalStmt::Send { to, sig } => {
                    sends.insert((lp.role.clone(), to.clone(), sig.clone()));
                }
                LocalStmt::Receive { from, sig } => {
                    recvs.insert((lp.role.clone(), from.clone(), sig.clone()));
                }
                _ => {}
            });
        }
        let mut want_sends = BTreeSet::new();
        let mut want_recvs = BTreeSet::new();
        for ev in interactions(&p.body) {
            for t in &ev.to {
                want_recvs.insert((t.clone(), ev.from.clone(), ev.sig.clone()));
            }
            want_sends.insert((ev.from, ev.to, ev.sig));
        }
        prop_assert_eq!(sends, want_sends);
        prop_assert_eq!(recvs, want_recvs);
    }

    #[test]
    fn monitors_are_deterministic_and_serialize(p in protocol()) {
        for lp in locals(&p) {
            let fsm = build_fsm(&lp).unwrap();
            prop_assert!(fsm.is_deterministic());
            prop_assert_eq!(parse_graph(&write_graph(&fsm)).unwrap(), fsm);
        }
    }

    #[test]
    fn accepted_traces_are_prefix_closed(p in protocol(), k in 0usize..=6) {
        for lp in locals(&p) {
            let traces = accepted_traces(&build_fsm(&lp).unwrap(), k);
            for t in &traces {
                prop_assert!(t.len() <= k);
                prop_assert!(traces.contains(&t[..t.len().saturating_sub(1)]));
            }
        }
    }

    #[test]
    fn monitor_agrees_with_trace_oracle(p in protocol()) {
        for lp in locals(&p) {
            let r = oracle_check(&Arc::new(build_fsm(&lp).unwrap()), 6);
            prop_assert!(r.agrees(), "{r:?}\n{}", print_local(&lp));
        }
    }

    #[test]
    fn projection_preserves_role_traces(p in protocol()) {
        for lp in locals(&p) {
            let local = accepted_traces(&build_fsm(&lp).unwrap(), 6);
            let global = restricted_traces(&p, &lp.role, 6);
            prop_assert_eq!(local, global, "{}\n{}", pretty_print(&p), print_local(&lp));
        }
    }

    #[test]
    fn violations_leave_the_monitor_untouched(
        p in protocol(),
        walk in vec(any::<prop::sample::Index>(), 0..8),
        probe in any::<prop::sample::Index>(),
        junk in any::<bool>(),
    ) {
        for lp in locals(&p) {
            let fsm = Arc::new(build_fsm(&lp).unwrap());
            let mut m = MonitorState::new(fsm.clone());
            for ix in &walk {
                let next = m.expected();
                if next.is_empty() {
                    break;
                }
                m.check_key(ix.get(&next)).unwrap();
            }
            let mut keys: Vec<ActionKey> = alphabet(&fsm).into_iter().collect();
            keys.push(ActionKey::send("A", "nope", vec![Sort::Unit]));
            let key = if junk { keys.last().unwrap() } else { probe.get(&keys) };
            let before = (m.cursor(), m.expected(), m.is_complete(), m.active_regions());
            let mut probe_state = m.clone();
            if let Err(v) = probe_state.check_key(key) {
                let after = (probe_state.cursor(), probe_state.expected(), probe_state.is_complete(), probe_state.active_regions());
                prop_assert_eq!(&after, &before);
                prop_assert_eq!(probe_state.check_key(key), Err(v));
            }
        }
    }
}

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_#]{1,12}"
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<String>().prop_map(Value::Str),
        any::<i64>().prop_map(Value::Int),
        any::<f64>()
            .prop_filter("NaN is not equal to itself", |x| !x.is_nan())
            .prop_map(Value::Real),
        any::<bool>().prop_map(Value::Bool),
        Just(Value::Unit),
    ]
}

fn message() -> impl Strategy<Value = SessionMessage> {
    (
        ident(),
        ident(),
        ident(),
        "[A-Za-z0-9_]{0,8}",
        vec(value(), 0..4),
    )
        .prop_map(|(id, s, t, l, p)| SessionMessage::new(id, s, t, l, p))
}

proptest! {
    #[test]
    fn envelope_records_round_trip(m in message()) {
        let line = m.to_record();
        prop_assert_eq!(line.matches('\n').count(), 1);
        prop_assert_eq!(SessionMessage::from_record(&line).unwrap(), m);
    }

    #[test]
    fn delivery_per_queue_follows_publish_order(keys in vec(0usize..4, 0..64)) {
        let b = Broker::new();
        b.declare_exchange("x", ExchangeKind::Direct).unwrap();
        for q in 0..4 {
            b.declare_queue(&format!("q{q}")).unwrap();
            b.bind("x", &format!("k{q}"), &format!("q{q}")).unwrap();
        }
        for (i, k) in keys.iter().enumerate() {
            let m = SessionMessage::new("p", "A", format!("k{k}"), "m", vec![Value::Int(i as i64)]);
            prop_assert_eq!(b.publish("x", &format!("k{k}"), m).unwrap(), 1);
        }
        for q in 0..4 {
            let want: Vec<i64> = keys.iter().enumerate().filter(|(_, k)| **k == q).map(|(i, _)| i as i64).collect();
            let mut got = Vec::new();
            while let Some(m) = b.try_recv(&format!("q{q}")).unwrap() {
                got.push(m.payload[0].as_int().unwrap());
            }
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn round_robin_is_fair(n in 1usize..6, k in 0usize..8) {
        let b = Broker::new();
        b.declare_exchange("rr", ExchangeKind::RoundRobin).unwrap();
        for q in 0..n {
            b.declare_queue(&format!("q{q}")).unwrap();
            b.bind("rr", "any", &format!("q{q}")).unwrap();
        }
        for _ in 0..k * n {
            b.publish("rr", "any", SessionMessage::new("p", "A", "any", "m", vec![])).unwrap();
        }
        for q in 0..n {
            prop_assert_eq!(b.queue_len(&format!("q{q}")).unwrap(), k);
        }
    }

    #[test]
    fn broadcast_reaches_every_binding(n in 0usize..6, extra in 0usize..3) {
        let b = Broker::new();
        b.declare_exchange("all", ExchangeKind::Broadcast).unwrap();
        for q in 0..n + extra {
            b.declare_queue(&format!("q{q}")).unwrap();
        }
        for q in 0..n {
            b.bind("all", "", &format!("q{q}")).unwrap();
        }
        let sent = b.publish("all", "", SessionMessage::new("p", "A", "", "m", vec![]));
        if n == 0 {
            prop_assert!(sent.is_err());
        } else {
            prop_assert_eq!(sent.unwrap(), n);
        }
        for q in n..n + extra {
            prop_assert_eq!(b.queue_len(&format!("q{q}")).unwrap(), 0);
        }
    }
}

#[test]
fn concurrent_publishers_keep_their_own_order() {
    let b = Broker::new();
    b.declare_exchange("x", ExchangeKind::Direct).unwrap();
    b.declare_queue("q").unwrap();
    b.bind("x", "k", "q").unwrap();
    std::thread::scope(|s| {
        for t in 0..4i64 {
            let b = &b;
            s.spawn(move || {
                for i in 0..500i64 {
                    let m =
                        SessionMessage::new("p", format!("T{t}"), "k", "m", vec![Value::Int(i)]);
                    b.publish("x", "k", m).unwrap();
                }
            });
        }
    });
    let mut last = [-1i64; 4];
    let mut n = 0;
    while let Some(m) = b.try_recv("q").unwrap() {
        let t: usize = m.sender_role[1..].parse().unwrap();
        let i = m.payload[0].as_int().unwrap();
        assert_eq!(i, last[t] + 1);
        last[t] = i;
        n += 1;
    }
    assert_eq!(n, 2000);
}
