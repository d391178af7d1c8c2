use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{fixture, Scenario};
use crate::broker::{SessionMessage, Value};
use crate::projection::{walk_local, LocalStmt};
use crate::runtime::{ActorId, ActorSpec, Assign, Ctx, Runtime, RuntimeError, SELF_SENDER};

pub(crate) type Collect = Box<dyn Fn(&Runtime) -> Option<String> + Send>;

type R = Result<(), RuntimeError>;

fn int(m: &SessionMessage, i: usize) -> Result<i64, RuntimeError> {
    m.payload
        .get(i)
        .and_then(Value::as_int)
        .ok_or_else(|| RuntimeError::handler(format!("`{}` lacks an int at {i}", m.label)))
}

fn real(m: &SessionMessage, i: usize) -> Result<f64, RuntimeError> {
    m.payload
        .get(i)
        .and_then(Value::as_real)
        .ok_or_else(|| RuntimeError::handler(format!("`{}` lacks a real at {i}", m.label)))
}

fn text(m: &SessionMessage, i: usize) -> Result<String, RuntimeError> {
    m.payload
        .get(i)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| RuntimeError::handler(format!("`{}` lacks a str at {i}", m.label)))
}

/// Closes the current session once its monitor accepts.
fn settle(ctx: &mut Ctx<'_>) -> R {
    if ctx.is_complete() {
        ctx.close();
    }
    Ok(())
}

fn ignore<S>(_: &mut S, _: &mut Ctx<'_>, _: &SessionMessage) -> R {
    Ok(())
}

fn close<S>(_: &mut S, ctx: &mut Ctx<'_>, _: &SessionMessage) -> R {
    ctx.close();
    Ok(())
}

fn state<S: 'static, T>(rt: &Runtime, id: ActorId, f: impl FnOnce(&S) -> T) -> Option<T> {
    rt.with_state(id, f).ok()
}

/// Sets up the actors and sessions of a scenario and queues its kickoff.
pub(crate) fn install(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    match sc.driver.as_str() {
        "warehouse" => warehouse(sc, rt),
        "flat_pingpong" => flat_pingpong(rt),
        "rec_pingpong" => rec_pingpong(sc, rt),
        "counter" => counter(sc, rt),
        "fibonacci" => fibonacci(sc, rt),
        "big" => big(rt),
        "ring" => ring(sc, rt),
        "kfork" => kfork(sc, rt),
        "dining_philosophers" => dining(sc, rt),
        "sleeping_barber" => sleeping_barber(sc, rt),
        "cigarette_smoker" => cigarettes(sc, rt),
        "bank_transaction" => bank_transaction(rt),
        "bank_transactions" => bank_transactions(rt),
        "logistic_map" => logistic_map(sc, rt),
        "pcbounded" => pcbounded(sc, rt),
        "wordcount" => wordcount(sc, rt),
        other => Err(RuntimeError::handler(format!("no driver `{other}`"))),
    }
}

#[derive(Default)]
struct Customer {
    delivered: Option<String>,
}

#[derive(Default)]
struct Seller {
    stock: i64,
    sold: Vec<String>,
}

/// Registers the `Customer`, `Warehouse`, `Authenticator` and `Dealer`
/// types of the Purchase and StoreLoad protocols.
pub fn register_warehouse(rt: &Runtime, product: &str) -> R {
    let product = product.to_string();
    rt.register(
        ActorSpec::new("Customer", Customer::default)
            .protocol("c", "Purchase", "B")
            .on("c", "start", SELF_SENDER, |_, ctx, _| {
                ctx.send("S", "login", vec!["alice".into()])
            })
            .on("c", "auth", "A", move |_, ctx, _| {
                ctx.send("S", "buy", vec![product.as_str().into()])
            })
            .on("c", "", "S", close)
            .on("c", "deliver", "S", |s: &mut Customer, ctx, m| {
                s.delivered = Some(text(m, 0)?);
                ctx.close();
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Warehouse", Seller::default)
            .protocol("c", "Purchase", "S")
            .protocol("c1", "StoreLoad", "S")
            .on("c", "login", "B", |_, ctx, m| {
                ctx.send("A", "login", m.payload.clone())
            })
            .on("c", "auth", "A", ignore)
            .on("c", "req", "B", |s: &mut Seller, ctx, _| {
                ctx.send("B", "", vec![Value::Int(s.stock)])?;
                ctx.close();
                Ok(())
            })
            .on("c", "buy", "B", |s, ctx, m| {
                let item = text(m, 0)?;
                s.sold.push(item.clone());
                ctx.send("B", "deliver", vec![format!("{item} shipped").into()])?;
                ctx.close();
                ctx.become_("c1", "update", vec![item.into()])
            })
            .on("c", "quit", "B", close)
            .on("c1", "update", SELF_SENDER, |_, ctx, m| {
                ctx.send("D", "req", vec![m.payload[0].clone(), Value::Int(1)])
            })
            .on("c1", "put", "D", |s, ctx, m| {
                s.stock += int(m, 1)?;
                ctx.send("D", "quit", vec![])
            })
            .on("c1", "acc", "D", close),
    )?;
    rt.register(
        ActorSpec::new("Authenticator", || ())
            .protocol("c", "Purchase", "A")
            .on("c", "login", "S", |_, ctx, _| {
                ctx.send_multi(&["B", "S"], "auth", vec!["ok".into()])?;
                ctx.close();
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Dealer", || 10i64)
            .protocol("c", "StoreLoad", "D")
            .on("c", "req", "S", |batch, ctx, m| {
                let n = int(m, 1)? * *batch;
                ctx.send("S", "put", vec![m.payload[0].clone(), Value::Int(n)])
            })
            .on("c", "quit", "S", |_, ctx, _| {
                ctx.send("S", "acc", vec![])?;
                ctx.close();
                Ok(())
            }),
    )
}

fn warehouse(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    register_warehouse(rt, &sc.text("product", "book"))?;
    let customer = rt.spawn("Customer")?;
    let seller = rt.spawn("Warehouse")?;
    rt.spawn("Authenticator")?;
    rt.spawn("Dealer")?;
    rt.protocol_create(
        "StoreLoad",
        &[("S", Assign::Actor(seller)), ("D", Assign::ty("Dealer"))],
    )?;
    let dir = rt.protocol_create(
        "Purchase",
        &[
            ("B", Assign::Actor(customer)),
            ("S", Assign::Actor(seller)),
            ("A", Assign::ty("Authenticator")),
        ],
    )?;
    rt.start(&dir, "B", "start", vec![])?;
    Ok(Box::new(move |rt| {
        let got = state(rt, customer, |c: &Customer| c.delivered.clone())??;
        let stock = state(rt, seller, |s: &Seller| s.stock)?;
        Some(format!("delivered={got:?} stock={stock}"))
    }))
}

fn pingpong_types(rt: &Runtime, protocol: &str, rounds: i64) -> R {
    rt.register(
        ActorSpec::new("Pinger", || 0i64)
            .protocol("c", protocol, "C")
            .on_join("c", |_, ctx| ctx.send("S", "ping", vec!["0".into()]))
            .on("c", "pong", "S", move |n, ctx, _| {
                *n += 1;
                if *n < rounds {
                    ctx.send("S", "ping", vec![n.to_string().into()])?;
                } else if ctx.is_complete() {
                    ctx.close();
                }
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Ponger", || ())
            .protocol("c", protocol, "S")
            .on("c", "ping", "C", |_, ctx, m| {
                ctx.send("C", "pong", m.payload.clone())?;
                settle(ctx)
            }),
    )
}

fn pingpong_session(rt: &Runtime, protocol: &str) -> Result<(ActorId, ActorId), RuntimeError> {
    let c = rt.spawn("Pinger")?;
    let s = rt.spawn("Ponger")?;
    rt.protocol_create(
        protocol,
        &[("C", Assign::Actor(c)), ("S", Assign::Actor(s))],
    )?;
    Ok((c, s))
}

fn flat_pingpong(rt: &Runtime) -> Result<Collect, RuntimeError> {
    pingpong_types(rt, "FlatPingPong", 1)?;
    let (c, _) = pingpong_session(rt, "FlatPingPong")?;
    Ok(Box::new(move |rt| {
        state(rt, c, |n: &i64| format!("round_trips={n}"))
    }))
}

fn rec_pingpong(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    pingpong_types(rt, "RecPingPong", sc.int("rounds", 10))?;
    let (c, _) = pingpong_session(rt, "RecPingPong")?;
    Ok(Box::new(move |rt| {
        state(rt, c, |n: &i64| format!("round_trips={n}"))
    }))
}

fn counter(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let values = sc.int("values", 100);
    rt.register(
        ActorSpec::new("Producer", || None::<i64>)
            .protocol("c", "Counter", "P")
            .on_join("c", move |_, ctx| {
                for _ in 0..values {
                    ctx.send("C", "value", vec![Value::Int(1)])?;
                }
                ctx.send("C", "retrieve_message", vec![])
            })
            .on("c", "result", "C", |total, ctx, m| {
                *total = Some(int(m, 0)?);
                ctx.close();
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Counter", || 0i64)
            .protocol("c", "Counter", "C")
            .on("c", "value", "P", |sum, _, m| {
                *sum += int(m, 0)?;
                Ok(())
            })
            .on("c", "retrieve_message", "P", |sum, ctx, _| {
                ctx.send("P", "result", vec![Value::Int(*sum)])?;
                ctx.close();
                Ok(())
            }),
    )?;
    let p = rt.spawn("Producer")?;
    rt.spawn("Counter")?;
    rt.protocol_create(
        "Counter",
        &[("P", Assign::Actor(p)), ("C", Assign::ty("Counter"))],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, p, |t: &Option<i64>| t.map(|t| format!("result={t}")))?
    }))
}

/// Fibonacci extended to negative indices, so `f(n) = f(n-1) + f(n-2)`
/// holds for every integer `n`.
pub(crate) fn fib(n: i64) -> i64 {
    let (mut a, mut b) = (0i64, 1i64);
    for _ in 0..n.unsigned_abs() {
        (a, b) = (b, a + b);
    }
    if n < 0 && n % 2 == 0 {
        -a
    } else {
        a
    }
}

#[derive(Default)]
struct FibNode {
    pending: HashMap<(String, String), (String, i64, usize)>,
}

fn fib_request(s: &mut FibNode, ctx: &mut Ctx<'_>, m: &SessionMessage) -> R {
    let n = int(m, 0)?;
    let mut children = Vec::new();
    walk_local(&ctx.local().body, &mut |st| {
        if let LocalStmt::Send { to, sig } = st {
            if sig.label == "request" {
                children.extend(to.iter().cloned());
            }
        }
    });
    if children.is_empty() {
        ctx.send(&m.sender_role, "result", vec![Value::Int(fib(n))])?;
        return settle(ctx);
    }
    let key = (ctx.protocol_id().to_string(), ctx.self_role().to_string());
    s.pending
        .insert(key, (m.sender_role.clone(), 0, children.len()));
    for (i, child) in children.iter().enumerate() {
        ctx.send(child, "request", vec![Value::Int(n - 1 - i as i64)])?;
    }
    Ok(())
}

fn fib_result(s: &mut FibNode, ctx: &mut Ctx<'_>, m: &SessionMessage) -> R {
    let key = (ctx.protocol_id().to_string(), ctx.self_role().to_string());
    let entry = s
        .pending
        .get_mut(&key)
        .ok_or_else(|| RuntimeError::handler("result without request"))?;
    entry.1 += int(m, 0)?;
    entry.2 -= 1;
    if entry.2 == 0 {
        let (parent, sum, _) = s.pending.remove(&key).expect("present");
        ctx.send(&parent, "result", vec![Value::Int(sum)])?;
        settle(ctx)?;
    }
    Ok(())
}

fn fibonacci(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let n = sc.int("n", 10);
    rt.register(
        ActorSpec::new("FibClient", || None::<i64>)
            .protocol("c", "Fib", "P")
            .on_join("c", move |_, ctx| {
                ctx.send("C", "request", vec![Value::Int(n)])
            })
            .on("c", "result", "C", |r, ctx, m| {
                *r = Some(int(m, 0)?);
                ctx.close();
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("FibNode", FibNode::default)
            .protocol("c", "Fib", "C")
            .on("c", "request", "P", fib_request)
            .on("c", "request", "C", fib_request)
            .on("c", "result", "C", fib_result),
    )?;
    let client = rt.spawn("FibClient")?;
    for _ in 0..sc.int("nodes", 4) {
        rt.spawn("FibNode")?;
    }
    rt.protocol_create(
        "Fib",
        &[("P", Assign::Actor(client)), ("C", Assign::ty("FibNode"))],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, client, |r: &Option<i64>| {
            r.map(|v| format!("fib({n})={v}"))
        })?
    }))
}

fn big(rt: &Runtime) -> Result<Collect, RuntimeError> {
    fn other(ctx: &Ctx<'_>) -> &'static str {
        if ctx.self_role() == "A" {
            "B"
        } else {
            "A"
        }
    }
    let ping =
        |_: &mut (), ctx: &mut Ctx<'_>, _: &SessionMessage| ctx.send(other(ctx), "pong", vec![]);
    let pong = |_: &mut (), ctx: &mut Ctx<'_>, _: &SessionMessage| ctx.send("S", "done", vec![]);
    rt.register(
        ActorSpec::new("Pinger", || ())
            .protocol("c", "Big", "A")
            .protocol("c", "Big", "B")
            .on_join("c", |_, ctx| ctx.send(other(ctx), "ping", vec![]))
            .on("c", "ping", "A", ping)
            .on("c", "ping", "B", ping)
            .on("c", "pong", "A", pong)
            .on("c", "pong", "B", pong)
            .on("c", "done", "S", close),
    )?;
    rt.register(
        ActorSpec::new("Sink", || 0u32)
            .protocol("c", "Big", "S")
            .on("c", "done", "A", |n, ctx, _| sink_done(n, ctx))
            .on("c", "done", "B", |n, ctx, _| sink_done(n, ctx)),
    )?;
    fn sink_done(n: &mut u32, ctx: &mut Ctx<'_>) -> R {
        *n += 1;
        if *n == 2 {
            ctx.send("A", "done", vec![])?;
            ctx.send("B", "done", vec![])?;
            ctx.close();
        }
        Ok(())
    }
    rt.spawn("Pinger")?;
    rt.spawn("Pinger")?;
    rt.spawn("Sink")?;
    rt.protocol_create(
        "Big",
        &[
            ("A", Assign::ty("Pinger")),
            ("B", Assign::ty("Pinger")),
            ("S", Assign::ty("Sink")),
        ],
    )?;
    Ok(Box::new(|_| None))
}

fn ring(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let loops = sc.int("loops", 10);
    fn next(ctx: &Ctx<'_>) -> Result<String, RuntimeError> {
        let n = ctx.family("Worker").len() as i64;
        let i = ctx.self_index().unwrap_or(1);
        ctx.peer_indexed("Worker", i % n + 1)
    }
    rt.register(
        ActorSpec::new("Worker", || 0i64)
            .protocol("c", "RingLoop", "Worker")
            .on_join("c", |_, ctx| {
                if ctx.self_index() == Some(1) {
                    let to = next(ctx)?;
                    ctx.send(&to, "data", vec![Value::Int(0)])?;
                }
                Ok(())
            })
            .on("c", "data", "Worker", move |laps, ctx, m| {
                let v = int(m, 0)?;
                let to = next(ctx)?;
                if ctx.self_index() == Some(1) {
                    *laps += 1;
                    if *laps >= loops {
                        ctx.send(&to, "stop", vec![])?;
                        return settle(ctx);
                    }
                }
                ctx.send(&to, "data", vec![Value::Int(v + 1)])
            })
            .on("c", "stop", "Worker", |_, ctx, _| {
                let n = ctx.family("Worker").len() as i64;
                if ctx.self_index() != Some(n) {
                    let to = next(ctx)?;
                    ctx.send(&to, "stop", vec![])?;
                }
                settle(ctx)
            }),
    )?;
    let n = sc.bindings.get("N").copied().unwrap_or(3);
    let first = rt.spawn("Worker")?;
    for _ in 1..n {
        rt.spawn("Worker")?;
    }
    rt.protocol_create("RingLoop", &[("Worker", Assign::ty("Worker"))])?;
    Ok(Box::new(move |rt| {
        state(rt, first, |l: &i64| format!("loops={l}"))
    }))
}

fn kfork(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let protocol = sc.text("protocol", "KFork");
    let family = sc.text("workers", "Worker");
    let items = sc.int("items", 5);
    let fam = family.clone();
    rt.register(
        ActorSpec::new("Master", || ())
            .protocol("c", &protocol, "M")
            .on_join("c", move |_, ctx| {
                let workers = ctx.family(&fam);
                for k in 0..items {
                    for w in &workers {
                        ctx.send(w, "data", vec![Value::Int(k)])?;
                    }
                }
                for w in &workers {
                    ctx.send(w, "end", vec![])?;
                }
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("KWorker", || 0i64)
            .protocol("c", &protocol, &family)
            .on("c", "data", "M", |sum, _, m| {
                *sum += int(m, 0)?;
                Ok(())
            })
            .on("c", "end", "M", close),
    )?;
    rt.spawn("Master")?;
    let k = sc.bindings.get("K").copied().unwrap_or(3);
    let workers: Vec<ActorId> = (0..k)
        .map(|_| rt.spawn("KWorker"))
        .collect::<Result<_, _>>()?;
    rt.protocol_create(
        &protocol,
        &[
            ("M", Assign::ty("Master")),
            (&family, Assign::ty("KWorker")),
        ],
    )?;
    Ok(Box::new(move |rt| {
        let sums: Vec<i64> = workers
            .iter()
            .map(|w| state(rt, *w, |s: &i64| *s))
            .collect::<Option<_>>()?;
        Some(format!("sums={sums:?}"))
    }))
}

#[derive(Default)]
struct Arbitrator {
    forks: BTreeMap<i64, String>,
    finished: usize,
}

impl Arbitrator {
    fn release(&mut self, who: &str) {
        self.forks.retain(|_, holder| holder != who);
    }
}

fn dining(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let meals = sc.int("meals", 2);
    rt.register(
        ActorSpec::new("Arbitrator", Arbitrator::default)
            .protocol("c", "DiningPhilosophers", "A")
            .on("c", "req", "Ph", |s: &mut Arbitrator, ctx, m| {
                let who = m.sender_role.clone();
                s.release(&who);
                let n = ctx.family("Ph").len() as i64;
                let i = ctx
                    .family("Ph")
                    .iter()
                    .position(|r| *r == who)
                    .ok_or_else(|| RuntimeError::handler("unknown philosopher"))?
                    as i64;
                let (left, right) = (i, (i + 1) % n);
                if s.forks.contains_key(&left) || s.forks.contains_key(&right) {
                    return ctx.send(&who, "no", vec![]);
                }
                s.forks.insert(left, who.clone());
                s.forks.insert(right, who.clone());
                ctx.send(&who, "yes", vec![])
            })
            .on("c", "done", "Ph", |s, ctx, m| {
                s.release(&m.sender_role);
                s.finished += 1;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Philosopher", || 0i64)
            .protocol("c", "DiningPhilosophers", "Ph")
            .on_join("c", |_, ctx| ctx.send("A", "req", vec![]))
            .on("c", "yes", "A", move |eaten, ctx, _| {
                *eaten += 1;
                if *eaten < meals {
                    ctx.send("A", "req", vec![])
                } else {
                    ctx.send("A", "done", vec![])?;
                    settle(ctx)
                }
            })
            .on("c", "no", "A", |_, ctx, _| ctx.send("A", "req", vec![])),
    )?;
    let a = rt.spawn("Arbitrator")?;
    let n = sc.bindings.get("N").copied().unwrap_or(3);
    for _ in 0..n {
        rt.spawn("Philosopher")?;
    }
    rt.protocol_create(
        "DiningPhilosophers",
        &[("A", Assign::Actor(a)), ("Ph", Assign::ty("Philosopher"))],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, a, |s: &Arbitrator| format!("finished={}", s.finished))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    None,
    Deadlock,
    Termination,
    Orphan,
}

fn sleeping_barber(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let fault = match sc.text("fault", "none").as_str() {
        "none" => Fault::None,
        "deadlock" => Fault::Deadlock,
        "termination" => Fault::Termination,
        "orphan" => Fault::Orphan,
        other => return Err(RuntimeError::handler(format!("unknown fault `{other}`"))),
    };
    let visits = sc.int("visits", 4);
    let next_visit = move |n: &mut i64, ctx: &mut Ctx<'_>, _: &SessionMessage| {
        *n += 1;
        if *n < visits {
            return ctx.send("R", "enter", vec![]);
        }
        ctx.send("R", "done", vec![])?;
        ctx.send("C", "done", vec![])?;
        settle(ctx)
    };
    rt.register(
        ActorSpec::new("Selector", || 0i64)
            .protocol("c", "SleepingBarber", "S")
            .on_join("c", |_, ctx| ctx.send("R", "enter", vec![]))
            .on("c", "returned", "C", next_visit)
            .on("c", "done", "C", next_visit),
    )?;
    rt.register(
        ActorSpec::new("Room", || 0i64)
            .protocol("c", "SleepingBarber", "R")
            .on("c", "enter", "S", |n, ctx, _| {
                *n += 1;
                if *n % 2 == 0 {
                    ctx.send("C", "full", vec![])?;
                    ctx.send("B", "wait", vec![])
                } else {
                    ctx.send("C", "wait", vec![])?;
                    ctx.send("B", "enter", vec![])
                }
            })
            .on("c", "next", "B", ignore)
            .on("c", "done", "S", move |_, ctx, _| {
                let label = if fault == Fault::Orphan {
                    "don"
                } else {
                    "done"
                };
                ctx.send("B", label, vec![])?;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Barber", || 0i64)
            .protocol("c", "SleepingBarber", "B")
            .on("c", "wait", "R", ignore)
            .on("c", "enter", "R", |cuts, ctx, _| {
                ctx.send("C", "start", vec![])?;
                ctx.send("R", "next", vec![])?;
                ctx.send("C", "stop", vec![])?;
                *cuts += 1;
                Ok(())
            })
            .on("c", "done", "R", close),
    )?;
    rt.register(
        ActorSpec::new("Customer", || ())
            .protocol("c", "SleepingBarber", "C")
            .on("c", "full", "R", move |_, ctx, _| {
                let to = if fault == Fault::Deadlock { "R" } else { "S" };
                ctx.send(to, "returned", vec![])
            })
            .on("c", "wait", "R", ignore)
            .on("c", "start", "B", ignore)
            .on("c", "stop", "B", move |_, ctx, _| {
                let to = if fault == Fault::Termination {
                    "R"
                } else {
                    "S"
                };
                ctx.send(to, "done", vec![])
            })
            .on("c", "done", "S", close),
    )?;
    let barber = rt.spawn("Barber")?;
    for t in ["Selector", "Room", "Customer"] {
        rt.spawn(t)?;
    }
    rt.protocol_create(
        "SleepingBarber",
        &[
            ("B", Assign::ty("Barber")),
            ("S", Assign::ty("Selector")),
            ("R", Assign::ty("Room")),
            ("C", Assign::ty("Customer")),
        ],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, barber, |c: &i64| format!("haircuts={c}"))
    }))
}

fn cigarettes(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let rounds = sc.int("rounds", 6);
    fn offer(ctx: &mut Ctx<'_>) -> R {
        let smokers = ctx.family("S");
        let i = ctx.rng().gen_range(0..smokers.len());
        ctx.send(&smokers[i], "start_smoking", vec![])
    }
    rt.register(
        ActorSpec::new("Arbiter", || 0i64)
            .protocol("c", "CigaretteSmoker", "A")
            .on_join("c", |_, ctx| offer(ctx))
            .on("c", "started_smoking", "S", move |n, ctx, _| {
                *n += 1;
                if *n < rounds {
                    return offer(ctx);
                }
                let smokers = ctx.family("S");
                let to: Vec<&str> = smokers.iter().map(String::as_str).collect();
                ctx.send_multi(&to, "exit", vec![])?;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Smoker", || 0i64)
            .protocol("c", "CigaretteSmoker", "S")
            .on("c", "start_smoking", "A", |n, ctx, _| {
                *n += 1;
                ctx.send("A", "started_smoking", vec![])
            })
            .on("c", "exit", "A", close),
    )?;
    let a = rt.spawn("Arbiter")?;
    for _ in 0..sc.bindings.get("N").copied().unwrap_or(3) {
        rt.spawn("Smoker")?;
    }
    rt.protocol_create(
        "CigaretteSmoker",
        &[("A", Assign::Actor(a)), ("S", Assign::ty("Smoker"))],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, a, |n: &i64| format!("rounds={n}"))
    }))
}

fn bank_transaction(rt: &Runtime) -> Result<Collect, RuntimeError> {
    rt.register(
        ActorSpec::new("Teller", || ())
            .protocol("c", "BankTransaction", "T")
            .on_join("c", |_, ctx| ctx.send("S", "credit", vec![]))
            .on("c", "reply", "S", close),
    )?;
    rt.register(
        ActorSpec::new("Account", || ())
            .protocol("c", "BankTransaction", "S")
            .protocol("c", "BankTransaction", "D")
            .on("c", "credit", "T", |_, ctx, _| {
                ctx.send("D", "debit", vec![])
            })
            .on("c", "debit", "S", |_, ctx, _| {
                ctx.send("S", "reply", vec![])?;
                settle(ctx)
            })
            .on("c", "reply", "D", |_, ctx, _| {
                ctx.send("T", "reply", vec![])?;
                settle(ctx)
            }),
    )?;
    rt.spawn("Teller")?;
    rt.spawn("Account")?;
    rt.spawn("Account")?;
    rt.protocol_create(
        "BankTransaction",
        &[
            ("T", Assign::ty("Teller")),
            ("S", Assign::ty("Account")),
            ("D", Assign::ty("Account")),
        ],
    )?;
    Ok(Box::new(|_| None))
}

fn bank_transactions(rt: &Runtime) -> Result<Collect, RuntimeError> {
    rt.register(
        ActorSpec::new("Teller", || 0usize)
            .protocol("c", "BankTransactions", "T")
            .on_join("c", |_, ctx| {
                let accounts = ctx.family("Acc");
                for a in &accounts[..accounts.len() - 1] {
                    ctx.send(a, "credit", vec![])?;
                }
                Ok(())
            })
            .on("c", "reply", "Acc", |n, ctx, _| {
                *n += 1;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Account", || ())
            .protocol("c", "BankTransactions", "Acc")
            .on("c", "credit", "T", |_, ctx, _| {
                let i = ctx.self_index().unwrap_or(1);
                let to = ctx.peer_indexed("Acc", i + 1)?;
                ctx.send(&to, "debit", vec![])
            })
            .on("c", "debit", "Acc", |_, ctx, m| {
                ctx.send(&m.sender_role, "reply", vec![])?;
                settle(ctx)
            })
            .on("c", "reply", "Acc", |_, ctx, _| {
                ctx.send("T", "reply", vec![])?;
                settle(ctx)
            }),
    )?;
    let t = rt.spawn("Teller")?;
    for _ in 0..3 {
        rt.spawn("Account")?;
    }
    rt.protocol_create(
        "BankTransactions",
        &[("T", Assign::Actor(t)), ("Acc", Assign::ty("Account"))],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, t, |n: &usize| format!("replies={n}"))
    }))
}

fn logistic_map(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let r = sc.real("r", 3.64);
    let x0 = sc.real("x0", 0.5);
    rt.register(
        ActorSpec::new("Master", Vec::<f64>::new)
            .protocol("c", "LogisticMap", "M")
            .on_join("c", |_, ctx| {
                let series = ctx.family("S");
                let to: Vec<&str> = series.iter().map(String::as_str).collect();
                ctx.send_multi(&to, "request", vec![])
            })
            .on("c", "response", "S", |xs, ctx, m| {
                xs.push(real(m, 0)?);
                let series = ctx.family("S");
                if xs.len() == series.len() {
                    let to: Vec<&str> = series.iter().map(String::as_str).collect();
                    ctx.send_multi(&to, "stop", vec![])?;
                    ctx.close();
                }
                Ok(())
            }),
    )?;
    rt.register(
        ActorSpec::new("Series", || ())
            .protocol("c", "LogisticMap", "S")
            .on("c", "request", "M", move |_, ctx, _| {
                let i = ctx.self_index().unwrap_or(1);
                let to = ctx.peer_indexed("R", i)?;
                ctx.send(&to, "compute", vec![Value::Real(x0)])
            })
            .on("c", "result", "R", |_, ctx, m| {
                ctx.send("M", "response", vec![Value::Real(real(m, 0)?)])
            })
            .on("c", "stop", "M", close),
    )?;
    rt.register(
        ActorSpec::new("Ratio", || ())
            .protocol("c", "LogisticMap", "R")
            .on("c", "compute", "S", move |_, ctx, m| {
                let x = real(m, 0)?;
                ctx.send(
                    &m.sender_role,
                    "result",
                    vec![Value::Real(r * x * (1.0 - x))],
                )?;
                settle(ctx)
            }),
    )?;
    let master = rt.spawn("Master")?;
    let n = sc.bindings.get("N").copied().unwrap_or(2);
    for _ in 0..n {
        rt.spawn("Series")?;
        rt.spawn("Ratio")?;
    }
    rt.protocol_create(
        "LogisticMap",
        &[
            ("M", Assign::Actor(master)),
            ("S", Assign::ty("Series")),
            ("R", Assign::ty("Ratio")),
        ],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, master, |xs: &Vec<f64>| format!("x1={xs:?}"))
    }))
}

fn pcbounded(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let items = sc.int("items", 5);
    rt.register(
        ActorSpec::new("Buffer", || ())
            .protocol("c", "PCBounded", "B")
            .on_join("c", |_, ctx| ctx.send("P", "produce", vec![]))
            .on("c", "dm", "P", |_, ctx, _| {
                ctx.send("C", "dm", vec![])?;
                ctx.send("P", "stored", vec![])
            })
            .on("c", "more", "C", |_, ctx, _| {
                ctx.send("P", "produce", vec![])
            })
            .on("c", "exit", "P", |_, ctx, _| {
                ctx.send("C", "exit", vec![])?;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Producer", || 0i64)
            .protocol("c", "PCBounded", "P")
            .on("c", "produce", "B", move |made, ctx, _| {
                if *made < items {
                    *made += 1;
                    ctx.send("B", "dm", vec![])
                } else {
                    ctx.send("B", "exit", vec![])?;
                    settle(ctx)
                }
            })
            .on("c", "stored", "B", ignore),
    )?;
    rt.register(
        ActorSpec::new("Consumer", || 0i64)
            .protocol("c", "PCBounded", "C")
            .on("c", "dm", "B", |got, ctx, _| {
                *got += 1;
                ctx.send("B", "more", vec![])
            })
            .on("c", "exit", "B", close),
    )?;
    rt.spawn("Buffer")?;
    rt.spawn("Producer")?;
    let c = rt.spawn("Consumer")?;
    rt.protocol_create(
        "PCBounded",
        &[
            ("B", Assign::ty("Buffer")),
            ("P", Assign::ty("Producer")),
            ("C", Assign::ty("Consumer")),
        ],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, c, |n: &i64| format!("consumed={n}"))
    }))
}

fn count_words(line: &str) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    for w in line.split_whitespace() {
        *out.entry(w.to_lowercase()).or_insert(0) += 1;
    }
    out
}

fn encode_counts(counts: &BTreeMap<String, i64>) -> String {
    counts
        .iter()
        .map(|(w, n)| format!("{w}:{n}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn decode_counts(s: &str) -> Result<Vec<(String, i64)>, RuntimeError> {
    s.split_whitespace()
        .map(|pair| {
            let (w, n) = pair
                .rsplit_once(':')
                .ok_or_else(|| RuntimeError::handler(format!("bad count `{pair}`")))?;
            let n = n
                .parse()
                .map_err(|_| RuntimeError::handler(format!("bad count `{pair}`")))?;
            Ok((w.to_string(), n))
        })
        .collect()
}

fn wordcount(sc: &Scenario, rt: &Runtime) -> Result<Collect, RuntimeError> {
    let path = sc.text("document", "wordcount/document.txt");
    let doc = fixture(&path).ok_or_else(|| RuntimeError::handler(format!("no fixture {path}")))?;
    let lines: Vec<String> = doc
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect();
    rt.register(
        ActorSpec::new("Mapper", || ())
            .protocol("c", "WordCount", "M")
            .on_join("c", move |_, ctx| {
                let reducers = ctx.family("R");
                for (i, line) in lines.iter().enumerate() {
                    ctx.send(
                        &reducers[i % reducers.len()],
                        "count_lines",
                        vec![line.as_str().into()],
                    )?;
                }
                for r in &reducers {
                    ctx.send(r, "finish", vec![])?;
                }
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Reducer", || ())
            .protocol("c", "WordCount", "R")
            .on("c", "count_lines", "M", |_, ctx, m| {
                let counts = count_words(&text(m, 0)?);
                ctx.send("A", "aggregate", vec![encode_counts(&counts).into()])
            })
            .on("c", "finish", "M", |_, ctx, _| {
                ctx.send("A", "finish", vec![])?;
                settle(ctx)
            }),
    )?;
    rt.register(
        ActorSpec::new("Aggregator", BTreeMap::<String, i64>::new)
            .protocol("c", "WordCount", "A")
            .on("c", "aggregate", "R", |totals, _, m| {
                for (w, n) in decode_counts(&text(m, 0)?)? {
                    *totals.entry(w).or_insert(0) += n;
                }
                Ok(())
            })
            .on("c", "finish", "R", |_, ctx, _| settle(ctx)),
    )?;
    rt.spawn("Mapper")?;
    for _ in 0..sc.bindings.get("N").copied().unwrap_or(3) {
        rt.spawn("Reducer")?;
    }
    let agg = rt.spawn("Aggregator")?;
    rt.protocol_create(
        "WordCount",
        &[
            ("M", Assign::ty("Mapper")),
            ("R", Assign::ty("Reducer")),
            ("A", Assign::Actor(agg)),
        ],
    )?;
    Ok(Box::new(move |rt| {
        state(rt, agg, |t: &BTreeMap<String, i64>| {
            let words: i64 = t.values().sum();
            format!(
                "words={words} distinct={} the={}",
                t.len(),
                t.get("the").unwrap_or(&0)
            )
        })
    }))
}
