mod common;

use std::collections::{BTreeMap, HashMap};

use session_actors::corpus::{
    compile_fixture, default_bindings, fixture, protocol_files, run_scenario, Expect, RunOptions,
    Scenario,
};
use session_actors::monitor::{accepted_traces, Direction, MonitorState};
use session_actors::runtime::{TraceEvent, RUNTIME_SENDER, SELF_SENDER};
use session_actors::scribble::{
    check_with_bindings, expand, parse_global, pretty_print, walk_block, Bindings, RoleRef, Stmt,
};

use common::{interactions, restricted_traces};

#[test]
fn corpus_prints_and_reparses() {
    for path in protocol_files() {
        let p = parse_global(fixture(path).unwrap()).unwrap();
        let text = pretty_print(&p);
        assert_eq!(parse_global(&text).unwrap(), p, "{path}\n{text}");
    }
}

#[test]
fn corpus_is_well_formed() {
    for path in protocol_files() {
        let p = parse_global(fixture(path).unwrap()).unwrap();
        assert_eq!(
            check_with_bindings(&p, &default_bindings()),
            vec![],
            "{path}"
        );
    }
}

#[test]
fn expansion_is_idempotent_and_fully_resolved() {
    for path in protocol_files() {
        let p = parse_global(fixture(path).unwrap()).unwrap();
        let e = expand(&p, &default_bindings()).unwrap();
        assert!(e.is_concrete(), "{path}");
        assert_eq!(expand(&e, &Bindings::new()).unwrap(), e, "{path}");
        let resolves = |r: &RoleRef| {
            r.is_plain() && e.roles.iter().filter(|d| d.canonical() == r.base).count() == 1
        };
        walk_block(&e.body, &mut |s| match s {
            Stmt::Interaction { from, to, .. } => {
                assert!(resolves(from), "{path}: {from}");
                for t in to {
                    assert!(resolves(t), "{path}: {t}");
                }
            }
            Stmt::Choice { at, .. } => assert!(resolves(at), "{path}: {at}"),
            _ => {}
        });
    }
}

#[test]
fn corpus_monitors_are_deterministic_and_prefix_closed() {
    for path in protocol_files() {
        let c = compile_fixture(path, &default_bindings()).unwrap();
        for (role, fsm) in &c.fsms {
            assert!(fsm.is_deterministic(), "{path}@{role}");
            if fsm.state_count() > 40 {
                continue;
            }
            let traces = accepted_traces(fsm, 8);
            for t in &traces {
                assert!(
                    traces.contains(&t[..t.len().saturating_sub(1)]),
                    "{path}@{role}"
                );
            }
        }
    }
}

#[test]
fn small_corpus_protocols_project_faithfully() {
    let mut checked = Vec::new();
    for path in protocol_files() {
        let c = compile_fixture(path, &default_bindings()).unwrap();
        if interactions(&c.global.body).len() > 6 {
            continue;
        }
        for (role, fsm) in &c.fsms {
            let local = accepted_traces(fsm, 8);
            let global = restricted_traces(&c.global, role, 8);
            assert_eq!(local, global, "{path}@{role}");
        }
        checked.push(c.name().to_string());
    }
    assert!(checked.len() >= 5, "{checked:?}");
}

/// Replays a run's trace through fresh monitors: each published envelope
/// must be a legal send for its sender and each dispatched one a legal
/// receive for its target.
fn replay(sc: &Scenario, seed: u64, threaded: bool) {
    let o = run_scenario(
        sc,
        RunOptions {
            seed,
            threaded,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let store = sc.store().unwrap();
    let protocol_of: HashMap<&str, &str> = o
        .roles
        .iter()
        .map(|r| (r.protocol_id.as_str(), r.protocol.as_str()))
        .collect();
    let mut monitors: BTreeMap<(String, String), MonitorState> = BTreeMap::new();
    let mut check = |dir: Direction, role: &str, m: &session_actors::broker::SessionMessage| {
        let key = (m.protocol_id.clone(), role.to_string());
        let mon = monitors.entry(key).or_insert_with(|| {
            let proto = protocol_of[m.protocol_id.as_str()];
            MonitorState::new(store.get(proto).unwrap().fsms[role].clone())
        });
        if let Err(v) = mon.check(dir, m) {
            panic!("{} seed {seed}: {role} {v} on {m}", sc.name);
        }
    };
    for ev in &o.trace {
        match ev {
            TraceEvent::Published(m) => check(Direction::Send, &m.sender_role, m),
            TraceEvent::Dispatched { msg, .. }
                if msg.sender_role != SELF_SENDER && msg.sender_role != RUNTIME_SENDER =>
            {
                check(Direction::Receive, &msg.target_role, msg)
            }
            TraceEvent::Violation { .. } => panic!("{} seed {seed}: {ev}", sc.name),
            _ => {}
        }
    }
    for ((_, role), m) in &monitors {
        assert!(
            m.is_complete(),
            "{} seed {seed}: {role} replay ends open",
            sc.name
        );
    }
}

#[test]
fn every_delivery_was_legal_for_both_ends() {
    for sc in Scenario::all().unwrap() {
        if sc.expect != Expect::Complete {
            continue;
        }
        for seed in 0..4 {
            replay(&sc, seed, false);
        }
        replay(&sc, 7, true);
    }
}
