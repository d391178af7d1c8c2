use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::fixture;
use crate::broker::SessionMessage;
use crate::monitor::{Direction, MonitorState};
use crate::runtime::{
    ActorSpec, Assign, CompileError, CompiledProtocol, ProtocolStore, Runtime, RuntimeConfig,
    RuntimeError, SELF_SENDER,
};
use crate::scribble::Bindings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// One fresh session per round trip.
    Flat,
    /// One recursive session for every round trip.
    Rec,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(Variant::Flat),
            "rec" => Ok(Variant::Rec),
            _ => Err(format!("unknown variant `{s}` (expected flat or rec)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingPongStats {
    pub variant: Variant,
    pub monitored: bool,
    pub iterations: usize,
    pub sessions: usize,
    pub pings: usize,
    pub pongs: usize,
    pub median_ns: f64,
    pub mean_ns: f64,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn nanos(d: Duration) -> f64 {
    d.as_secs_f64() * 1e9
}

#[derive(Default)]
struct Counts {
    pings: usize,
    pongs: usize,
}

/// Times `iterations` ping-pong round trips on the deterministic executor.
pub fn bench_pingpong(
    variant: Variant,
    monitored: bool,
    iterations: usize,
) -> Result<PingPongStats, RuntimeError> {
    let (file, protocol) = match variant {
        Variant::Flat => ("flat_pingpong/FlatPingPong.scr", "FlatPingPong"),
        Variant::Rec => ("rec_pingpong/RecPingPong.scr", "RecPingPong"),
    };
    let store = Arc::new(ProtocolStore::new());
    let src = fixture(file).expect("pingpong fixture");
    store
        .add_source(src, &Bindings::new())
        .map_err(|e| RuntimeError::handler(e.to_string()))?;
    let mut config = RuntimeConfig::default().with_monitoring(monitored);
    config.tracing = false;
    let rt = Runtime::with_store(store, config);
    rt.register(
        ActorSpec::new("Pinger", Counts::default)
            .protocol("c", protocol, "C")
            .on("c", "go", SELF_SENDER, |n: &mut Counts, ctx, _| {
                n.pings += 1;
                ctx.send("S", "ping", vec!["ping".into()])
            })
            .on("c", "pong", "S", |n, ctx, _| {
                n.pongs += 1;
                if ctx.is_complete() {
                    ctx.close();
                }
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Ponger", || ())
            .protocol("c", protocol, "S")
            .on("c", "ping", "C", |_, ctx, _| {
                ctx.send("C", "pong", vec!["pong".into()])?;
                if ctx.is_complete() {
                    ctx.close();
                }
                Ok(())
            }),
    )?;
    let c = rt.spawn("Pinger")?;
    let s = rt.spawn("Ponger")?;
    let assign = [("C", Assign::Actor(c)), ("S", Assign::Actor(s))];
    let mut sessions = 0;
    let mut dir = None;
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t0 = Instant::now();
        if variant == Variant::Flat || dir.is_none() {
            dir = Some(rt.protocol_create(protocol, &assign)?);
            sessions += 1;
        }
        rt.start(dir.as_ref().expect("created"), "C", "go", vec![])?;
        rt.run()?;
        samples.push(nanos(t0.elapsed()));
    }
    let mean_ns = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    let (pings, pongs) = rt.with_state(c, |n: &Counts| (n.pings, n.pongs))?;
    Ok(PingPongStats {
        variant,
        monitored,
        iterations,
        sessions,
        pings,
        pongs,
        median_ns: median(&mut samples),
        mean_ns,
    })
}

/// `msg1() from A to B; msg2() from B to A; ...` with `messages` lines.
pub fn chain_protocol(messages: usize) -> String {
    let mut s = String::from("global protocol Chain(role A, role B) {\n");
    for i in 1..=messages {
        let (from, to) = if i % 2 == 1 { ("A", "B") } else { ("B", "A") };
        let _ = writeln!(s, "  msg{i}() from {from} to {to};");
    }
    s.push_str("}\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    /// Messages in the chain.
    pub states: usize,
    /// States of each role's monitor.
    pub fsm_states: usize,
    /// Checks timed across all rounds.
    pub checks: usize,
    /// Median over rounds of the mean latency of one check.
    pub check_ns: f64,
}

/// Runs full sessions of a request-reply chain through both monitors and
/// reports the per-check latency.
pub fn bench_chain(states: usize) -> Result<ChainStats, CompileError> {
    let c = CompiledProtocol::compile(&chain_protocol(states), &Bindings::new())?;
    let msgs: Vec<SessionMessage> = (1..=states)
        .map(|i| {
            let (from, to) = if i % 2 == 1 { ("A", "B") } else { ("B", "A") };
            SessionMessage::new("chain", from, to, format!("msg{i}"), vec![])
        })
        .collect();
    let fa = c.fsms["A"].clone();
    let fb = c.fsms["B"].clone();
    let rounds = (400_000 / (2 * states.max(1))).clamp(5, 2_000);
    let mut per_check = Vec::with_capacity(rounds);
    let mut failures = 0usize;
    for _ in 0..rounds {
        let mut a = MonitorState::new(fa.clone());
        let mut b = MonitorState::new(fb.clone());
        let t0 = Instant::now();
        for m in &msgs {
            let (snd, rcv) = if m.sender_role == "A" {
                (&mut a, &mut b)
            } else {
                (&mut b, &mut a)
            };
            failures += snd.check(Direction::Send, m).is_err() as usize;
            failures += rcv.check(Direction::Receive, m).is_err() as usize;
        }
        let dt = nanos(t0.elapsed());
        debug_assert!(a.is_complete() && b.is_complete());
        per_check.push(dt / (2 * msgs.len()).max(1) as f64);
    }
    assert_eq!(failures, 0, "chain session violated its own protocol");
    Ok(ChainStats {
        states,
        fsm_states: fa.state_count(),
        checks: rounds * 2 * msgs.len(),
        check_ns: median(&mut per_check),
    })
}
