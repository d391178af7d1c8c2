//! End-to-end acceptance criteria. Each prints one PASS or FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use session_actors::broker::SessionMessage;
use session_actors::corpus::{
    bench_chain, bench_pingpong, compile_fixture, default_bindings, protocol_files,
    register_warehouse, run_scenario, Outcome, RunOptions, Scenario, Variant, Verdict,
};
use session_actors::monitor::{MonitorFsm, ViolationReason};
use session_actors::parallel::{compile_all, oracle_check_all, sweep_seeds, ExecMode};
use session_actors::runtime::{Assign, Runtime, RuntimeConfig};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn report(n: usize, title: &str, r: &Check) {
    let line = match r {
        Ok(detail) => format!("PASS {n}. {title}: {detail}"),
        Err(why) => format!("FAIL {n}. {title}: {why}"),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn corpus_compilation() -> Check {
    let t0 = Instant::now();
    let results = compile_all(ExecMode::default(), &default_bindings());
    let elapsed = t0.elapsed();
    let mut roles = 0;
    for r in &results {
        let e = r.as_ref().map_err(|e| e.to_string())?;
        ensure(e.roles > 0, || format!("{} has no roles", e.path))?;
        roles += e.roles;
    }
    ensure(results.len() >= 15, || {
        format!("only {} protocols", results.len())
    })?;
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} protocols, {roles} roles projected in {elapsed:.2?}",
        results.len()
    ))
}

fn strip_ids(msgs: Vec<SessionMessage>) -> Vec<SessionMessage> {
    msgs.into_iter()
        .map(|mut m| {
            m.protocol_id.clear();
            m
        })
        .collect()
}

fn fault_detection() -> Check {
    let faults = [
        (
            "sleeping_barber_deadlock",
            &["C"][..],
            ViolationReason::WrongPeer,
            "returned",
            "C",
            "R",
        ),
        (
            "sleeping_barber_termination",
            &["C", "R"][..],
            ViolationReason::WrongPeer,
            "done",
            "C",
            "R",
        ),
        (
            "sleeping_barber_orphan",
            &["R"][..],
            ViolationReason::UnexpectedLabel,
            "don",
            "R",
            "B",
        ),
    ];
    for (name, roles, reason, label, from, to) in faults {
        let sc = Scenario::load(name).map_err(|e| e.to_string())?;
        for seed in 0..10 {
            let o = run_scenario(&sc, RunOptions::seeded(seed)).map_err(|e| e.to_string())?;
            match o.verdict() {
                Verdict::Violation { role, reason: r }
                    if roles.contains(&role.as_str()) && r == reason => {}
                v => return Err(format!("{name} seed {seed}: {v}")),
            }
            let faulty = |m: &SessionMessage| {
                m.label == label && m.sender_role == from && m.target_role == to
            };
            ensure(!o.published().iter().any(faulty), || {
                format!("{name} seed {seed}: faulty envelope was published")
            })?;
            ensure(!o.dispatched().iter().any(faulty), || {
                format!("{name} seed {seed}: faulty envelope reached a handler")
            })?;
            let again = run_scenario(&sc, RunOptions::seeded(seed)).map_err(|e| e.to_string())?;
            ensure(
                strip_ids(o.published()) == strip_ids(again.published()),
                || format!("{name} seed {seed}: trace differs between runs"),
            )?;
        }
    }
    Ok("3 faults x 10 seeds blocked at the faulting role".into())
}

fn chain_shape() -> Check {
    let t0 = Instant::now();
    let mut rows = Vec::new();
    for states in [100, 1_000, 10_000] {
        let s = bench_chain(states).map_err(|e| e.to_string())?;
        rows.push((states, s.check_ns));
    }
    let elapsed = t0.elapsed();
    let ratio = rows[2].1 / rows[0].1;
    let table = rows
        .iter()
        .map(|(n, t)| format!("{n}:{t:.0}ns"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(ratio <= 2.0, || format!("ratio {ratio:.2} ({table})"))?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{table}, t(10000)/t(100) = {ratio:.2}"))
}

fn monitoring_overhead() -> Check {
    let run =
        |monitored| bench_pingpong(Variant::Rec, monitored, 10_000).map_err(|e| e.to_string());
    run(false)?;
    run(true)?;
    let off = run(false)?;
    let on = run(true)?;
    ensure(on.pongs == 10_000 && off.pongs == 10_000, || {
        "lost round trips".into()
    })?;
    let ratio = on.median_ns / off.median_ns;
    ensure(ratio <= 1.5, || {
        format!(
            "monitored {:.0}ns vs {:.0}ns, ratio {ratio:.2}",
            on.median_ns, off.median_ns
        )
    })?;
    Ok(format!(
        "median round trip {:.0}ns monitored vs {:.0}ns unmonitored, ratio {ratio:.2}",
        on.median_ns, off.median_ns
    ))
}

fn oracle_equivalence() -> Check {
    let t0 = Instant::now();
    let mut fsms: Vec<Arc<MonitorFsm>> = Vec::new();
    let mut seen = BTreeSet::new();
    for path in protocol_files() {
        let c = compile_fixture(path, &default_bindings()).map_err(|e| e.to_string())?;
        for f in c.fsms.values() {
            if f.state_count() <= 40 && seen.insert((f.protocol.clone(), f.role.clone())) {
                fsms.push(f.clone());
            }
        }
    }
    let reports = oracle_check_all(ExecMode::default(), &fsms, 8);
    let elapsed = t0.elapsed();
    if let Some(r) = reports.iter().find(|r| !r.agrees()) {
        return Err(format!(
            "{}@{}: {} monitor-only, {} oracle-only",
            r.protocol, r.role, r.monitor_only, r.oracle_only
        ));
    }
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    let traces: usize = reports.iter().map(|r| r.traces).sum();
    Ok(format!(
        "{} FSMs agree on {traces} traces in {elapsed:.2?}",
        reports.len()
    ))
}

/// Per (session, sender, receiver), the published and dispatched envelopes.
fn per_pair_order(o: &Outcome) -> Result<(), String> {
    type Key = (String, String, String);
    let group = |msgs: Vec<SessionMessage>| {
        let mut m: BTreeMap<Key, Vec<SessionMessage>> = BTreeMap::new();
        for x in msgs {
            let k = (
                x.protocol_id.clone(),
                x.sender_role.clone(),
                x.target_role.clone(),
            );
            m.entry(k).or_default().push(x);
        }
        m
    };
    let sent = group(o.published());
    let got = group(
        o.dispatched()
            .into_iter()
            .filter(|m| m.sender_role != "self")
            .collect(),
    );
    ensure(sent == got, || {
        "delivery order differs from send order".into()
    })
}

fn fifo_ordering() -> Check {
    let sc = Scenario::load("warehouse").map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..1_000).collect();
    let opts = RunOptions {
        threaded: true,
        ..RunOptions::default()
    };
    let t0 = Instant::now();
    let outcomes =
        sweep_seeds(ExecMode::default(), &sc, &seeds, opts).map_err(|e| e.to_string())?;
    let mut max_active = 0;
    for (seed, o) in seeds.iter().zip(outcomes) {
        let o = o.map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(o.violations().is_empty(), || {
            format!("seed {seed}: {:?}", o.violations())
        })?;
        ensure(o.verdict() == Verdict::Complete, || {
            format!("seed {seed}: {}", o.verdict())
        })?;
        per_pair_order(&o).map_err(|e| format!("seed {seed}: {e}"))?;
        max_active = max_active.max(o.max_active);
    }
    ensure(max_active == 1, || {
        format!("{max_active} handlers ran at once in one actor")
    })?;
    Ok(format!(
        "1000 threaded schedules in order, no violations, {:.2?}",
        t0.elapsed()
    ))
}

fn round_robin() -> Check {
    let sc = Scenario::load("warehouse").map_err(|e| e.to_string())?;
    let rt = Runtime::with_store(
        sc.store().map_err(|e| e.to_string())?,
        RuntimeConfig::default(),
    );
    register_warehouse(&rt, "book").map_err(|e| e.to_string())?;
    let sellers: Vec<usize> = (0..3)
        .map(|_| rt.spawn("Warehouse"))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    rt.spawn("Customer").map_err(|e| e.to_string())?;
    rt.spawn("Authenticator").map_err(|e| e.to_string())?;
    for _ in 0..9 {
        rt.protocol_create(
            "Purchase",
            &[
                ("B", Assign::ty("Customer")),
                ("S", Assign::ty("Warehouse")),
                ("A", Assign::ty("Authenticator")),
            ],
        )
        .map_err(|e| e.to_string())?;
    }
    let joins: Vec<usize> = sellers
        .iter()
        .map(|id| {
            rt.role_statuses()
                .iter()
                .filter(|s| s.actor == *id && s.role == "S")
                .count()
        })
        .collect();
    ensure(joins == [3, 3, 3], || format!("seller joins {joins:?}"))?;
    Ok(format!("seller joins per instance {joins:?}"))
}

fn happy_paths() -> Check {
    let mut done = Vec::new();
    for (name, result) in [
        ("warehouse", None),
        ("wordcount", None),
        ("counter", Some("result=100")),
        ("dining_philosophers", None),
        ("cigarette_smoker", None),
        ("bank_transaction", None),
        ("ring", Some("loops=10")),
    ] {
        let sc = Scenario::load(name).map_err(|e| e.to_string())?;
        let o = run_scenario(&sc, RunOptions::seeded(1)).map_err(|e| e.to_string())?;
        ensure(o.verdict() == Verdict::Complete, || {
            format!("{name}: {}", o.verdict())
        })?;
        ensure(o.roles.iter().all(|r| r.complete), || {
            format!("{name}: open monitor")
        })?;
        if let Some(want) = result {
            ensure(o.result.as_deref() == Some(want), || {
                format!("{name}: result {:?}", o.result)
            })?;
        }
        done.push(format!("{name}({} roles)", o.roles.len()));
    }
    Ok(done.join(" "))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("corpus compilation", corpus_compilation),
        ("fault detection", fault_detection),
        ("chain check latency shape", chain_shape),
        ("monitoring overhead", monitoring_overhead),
        ("oracle equivalence", oracle_equivalence),
        ("per-pair FIFO under threads", fifo_ordering),
        ("round-robin fairness", round_robin),
        ("happy-path session fidelity", happy_paths),
    ];
    let mut failed = Vec::new();
    for (i, (title, f)) in criteria.iter().enumerate() {
        let r = f();
        report(i + 1, title, &r);
        if r.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
