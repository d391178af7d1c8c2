use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::actor::{Actor, ActorCore, AnyActor};
use super::{
    ActorId, ActorSpec, CompileError, CompiledProtocol, ProtocolDecl, ProtocolStore, RoleHandle,
    RuntimeConfig, RuntimeError, TraceEvent, JOIN_LABEL, READY_LABEL, RUNTIME_SENDER, SELF_SENDER,
};
use crate::broker::{fresh_protocol_id, Broker, BrokerError, ExchangeKind, SessionMessage, Value};
use crate::scribble::Bindings;

/// Who plays a role in a new session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assign {
    /// Some instance of this actor type, chosen round-robin.
    Type(String),
    /// This running actor.
    Actor(ActorId),
}

impl Assign {
    pub fn ty(actor_type: &str) -> Self {
        Assign::Type(actor_type.to_string())
    }
}

/// The result of a successful [`Runtime::protocol_create`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directory {
    pub protocol_id: String,
    pub protocol: String,
    pub roles: BTreeMap<String, ActorId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleStatus {
    pub actor: ActorId,
    pub actor_type: String,
    pub protocol_id: String,
    pub protocol: String,
    pub role: String,
    pub complete: bool,
    pub closed: bool,
}

struct Session {
    protocol: String,
    expected: BTreeSet<String>,
    joined: BTreeMap<String, ActorId>,
}

pub(crate) struct Shared {
    pub broker: Arc<Broker>,
    pub store: Arc<ProtocolStore>,
    pub config: RuntimeConfig,
    trace: Mutex<Vec<TraceEvent>>,
    sessions: Mutex<HashMap<String, Session>>,
    joined: Condvar,
}

pub(crate) fn queue_name(id: ActorId) -> String {
    format!("actor.{id}")
}

fn type_exchange(actor_type: &str) -> String {
    format!("type.{actor_type}")
}

fn discovery_exchange(protocol: &str) -> String {
    format!("discovery.{protocol}")
}

impl Shared {
    pub fn record(&self, e: TraceEvent) {
        self.trace.lock().unwrap().push(e);
    }

    /// Notes that `actor` joined `role`; once every role has joined, each
    /// participant gets a ready envelope.
    pub fn ack_join(&self, pid: &str, role: &str, actor: ActorId) {
        let mut sessions = self.sessions.lock().unwrap();
        let Some(s) = sessions.get_mut(pid) else {
            return;
        };
        s.joined.insert(role.to_string(), actor);
        if s.joined.len() == s.expected.len() {
            for (r, id) in &s.joined {
                let ready = SessionMessage::new(pid, RUNTIME_SENDER, r, READY_LABEL, vec![]);
                if let Err(e) = self.broker.enqueue(&queue_name(*id), ready) {
                    log::error!("ready envelope lost: {e}");
                }
            }
            self.joined.notify_all();
        }
    }
}

struct Slot {
    id: ActorId,
    queue: String,
    actor: Mutex<Box<dyn AnyActor>>,
    active: AtomicUsize,
}

type Spawner = Arc<dyn Fn(ActorCore) -> Box<dyn AnyActor> + Send + Sync>;

struct TypeEntry {
    spec: Arc<dyn Any + Send + Sync>,
    decls: Vec<ProtocolDecl>,
    spawn: Spawner,
}

struct Inner {
    shared: Shared,
    actors: RwLock<Vec<Arc<Slot>>>,
    types: Mutex<HashMap<String, TypeEntry>>,
    sched: Mutex<ChaCha8Rng>,
    ids: Mutex<ChaCha8Rng>,
    max_active: AtomicUsize,
    workers: Mutex<Vec<JoinHandle<()>>>,
    stop: AtomicBool,
    threaded: AtomicBool,
}

/// A session-actor system. Cloning shares the same system.
///
/// Actors run either on the caller's thread through [`Runtime::run`], which
/// picks the next inbox with a seeded RNG, or on one thread each between
/// [`Runtime::start_threads`] and [`Runtime::stop_threads`].
#[derive(Clone)]
pub struct Runtime(Arc<Inner>);

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Self {
        Self::with_store(Arc::new(ProtocolStore::new()), config)
    }

    pub fn with_store(store: Arc<ProtocolStore>, config: RuntimeConfig) -> Self {
        let seed = config.seed;
        Runtime(Arc::new(Inner {
            shared: Shared {
                broker: Broker::new(),
                store,
                config,
                trace: Mutex::new(Vec::new()),
                sessions: Mutex::new(HashMap::new()),
                joined: Condvar::new(),
            },
            actors: RwLock::new(Vec::new()),
            types: Mutex::new(HashMap::new()),
            sched: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            ids: Mutex::new(ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed))),
            max_active: AtomicUsize::new(0),
            workers: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
            threaded: AtomicBool::new(false),
        }))
    }

    fn shared(&self) -> &Shared {
        &self.0.shared
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.shared().config
    }

    pub fn broker(&self) -> &Arc<Broker> {
        &self.shared().broker
    }

    pub fn store(&self) -> &Arc<ProtocolStore> {
        &self.shared().store
    }

    pub fn add_protocol(
        &self,
        source: &str,
        bindings: &Bindings,
    ) -> Result<Arc<CompiledProtocol>, CompileError> {
        self.store().add_source(source, bindings)
    }

    /// Validates `spec` against the store and wires its discovery exchanges.
    pub fn register<S: Send + 'static>(&self, spec: ActorSpec<S>) -> Result<(), RuntimeError> {
        spec.validate(self.store())?;
        let mut types = self.0.types.lock().unwrap();
        if types.contains_key(&spec.actor_type) {
            return Err(RuntimeError::DuplicateActorType(spec.actor_type));
        }
        let broker = self.broker();
        let tx = type_exchange(&spec.actor_type);
        broker.declare_exchange(&tx, ExchangeKind::RoundRobin)?;
        for d in &spec.decls {
            let dx = discovery_exchange(&d.protocol);
            if !broker.has_exchange(&dx) {
                broker.declare_exchange(&dx, ExchangeKind::Direct)?;
            }
            broker.bind_exchange(&dx, &spec.actor_type, &tx)?;
        }
        let spec = Arc::new(spec);
        let seeded = spec.clone();
        let spawn: Spawner = Arc::new(move |core| {
            Box::new(Actor {
                core,
                state: (seeded.factory)(),
                spec: seeded.clone(),
            })
        });
        types.insert(
            spec.actor_type.clone(),
            TypeEntry {
                decls: spec.decls.clone(),
                spec,
                spawn,
            },
        );
        Ok(())
    }

    /// Starts an instance of a registered type with its factory state.
    pub fn spawn(&self, actor_type: &str) -> Result<ActorId, RuntimeError> {
        let (decls, spawn) = {
            let types = self.0.types.lock().unwrap();
            let t = types
                .get(actor_type)
                .ok_or_else(|| RuntimeError::UnknownActorType(actor_type.to_string()))?;
            (t.decls.clone(), t.spawn.clone())
        };
        self.install(actor_type, decls, |core| spawn(core))
    }

    /// Starts an instance of a registered type with the given state.
    pub fn spawn_with<S: Send + 'static>(
        &self,
        actor_type: &str,
        state: S,
    ) -> Result<ActorId, RuntimeError> {
        let (decls, spec) = {
            let types = self.0.types.lock().unwrap();
            let t = types
                .get(actor_type)
                .ok_or_else(|| RuntimeError::UnknownActorType(actor_type.to_string()))?;
            let spec = t
                .spec
                .clone()
                .downcast::<ActorSpec<S>>()
                .map_err(|_| RuntimeError::StateType)?;
            (t.decls.clone(), spec)
        };
        self.install(actor_type, decls, move |core| {
            Box::new(Actor { core, spec, state })
        })
    }

    fn install(
        &self,
        actor_type: &str,
        decls: Vec<ProtocolDecl>,
        make: impl FnOnce(ActorCore) -> Box<dyn AnyActor>,
    ) -> Result<ActorId, RuntimeError> {
        let mut actors = self.0.actors.write().unwrap();
        let id = actors.len();
        let queue = queue_name(id);
        self.broker().declare_queue(&queue)?;
        self.broker().bind(&type_exchange(actor_type), "", &queue)?;
        let core = ActorCore {
            id,
            actor_type: actor_type.to_string(),
            queue: queue.clone(),
            decls,
            roles: HashMap::new(),
            next_seq: 0,
            rng: ChaCha8Rng::seed_from_u64(
                self.config().seed ^ (id as u64).wrapping_mul(0x9e37_79b9),
            ),
        };
        let slot = Arc::new(Slot {
            id,
            queue,
            actor: Mutex::new(make(core)),
            active: AtomicUsize::new(0),
        });
        actors.push(slot.clone());
        drop(actors);
        if self.0.threaded.load(Ordering::SeqCst) {
            self.spawn_worker(slot);
        }
        Ok(id)
    }

    pub fn actor_count(&self) -> usize {
        self.0.actors.read().unwrap().len()
    }

    fn slot(&self, id: ActorId) -> Result<Arc<Slot>, RuntimeError> {
        self.0
            .actors
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or(RuntimeError::UnknownActor(id))
    }

    fn plays(decls: &[ProtocolDecl], c: &CompiledProtocol, role: &str) -> bool {
        let family = c.family_of(role);
        decls.iter().any(|d| {
            d.protocol == c.name() && (d.self_role == role || Some(&d.self_role) == family.as_ref())
        })
    }

    /// Starts a session: mints a protocol id, declares its exchange, invites
    /// one actor per role and waits until all have joined.
    ///
    /// Assignment keys name a concrete role or a whole group family.
    pub fn protocol_create(
        &self,
        protocol: &str,
        assignments: &[(&str, Assign)],
    ) -> Result<Directory, RuntimeError> {
        let c = self
            .store()
            .get(protocol)
            .ok_or_else(|| RuntimeError::UnknownProtocol(protocol.to_string()))?;
        let mut plan = Vec::new();
        for role in c.role_names() {
            let family = c.family_of(&role);
            let (_, a) = assignments
                .iter()
                .find(|(k, _)| *k == role || Some(*k) == family.as_deref())
                .ok_or_else(|| RuntimeError::UnassignedRole {
                    protocol: protocol.to_string(),
                    role: role.clone(),
                })?;
            let (actor_type, decls) = match a {
                Assign::Type(t) => {
                    let types = self.0.types.lock().unwrap();
                    let e = types
                        .get(t)
                        .ok_or_else(|| RuntimeError::UnknownActorType(t.clone()))?;
                    (t.clone(), e.decls.clone())
                }
                Assign::Actor(id) => {
                    let slot = self.slot(*id)?;
                    let a = slot.actor.lock().unwrap();
                    (a.core().actor_type.clone(), a.core().decls.clone())
                }
            };
            if !Self::plays(&decls, &c, &role) {
                return Err(RuntimeError::RoleNotPlayed {
                    actor_type,
                    protocol: protocol.to_string(),
                    role,
                });
            }
            plan.push((role, a.clone()));
        }
        let pid = fresh_protocol_id(&mut *self.0.ids.lock().unwrap());
        self.broker().declare_exchange(&pid, ExchangeKind::Direct)?;
        self.shared().sessions.lock().unwrap().insert(
            pid.clone(),
            Session {
                protocol: protocol.to_string(),
                expected: plan.iter().map(|(r, _)| r.clone()).collect(),
                joined: BTreeMap::new(),
            },
        );
        for (role, a) in &plan {
            let join = SessionMessage::new(
                &pid,
                RUNTIME_SENDER,
                role,
                JOIN_LABEL,
                vec![Value::Str(protocol.to_string())],
            );
            let sent = match a {
                Assign::Type(t) => self
                    .broker()
                    .publish(&discovery_exchange(protocol), t, join)
                    .map(|_| ()),
                Assign::Actor(id) => self.broker().enqueue(&queue_name(*id), join),
            };
            if let Err(e) = sent {
                self.teardown(&pid);
                return Err(e.into());
            }
        }
        let roles = self.wait_joined(&pid)?;
        Ok(Directory {
            protocol_id: pid,
            protocol: protocol.to_string(),
            roles,
        })
    }

    fn joined(&self, pid: &str) -> Option<BTreeMap<String, ActorId>> {
        let sessions = self.shared().sessions.lock().unwrap();
        let s = sessions.get(pid)?;
        (s.joined.len() == s.expected.len()).then(|| s.joined.clone())
    }

    fn wait_joined(&self, pid: &str) -> Result<BTreeMap<String, ActorId>, RuntimeError> {
        if self.0.threaded.load(Ordering::SeqCst) {
            let deadline = Instant::now() + self.config().join_timeout;
            let mut sessions = self.shared().sessions.lock().unwrap();
            loop {
                let s = &sessions[pid];
                if s.joined.len() == s.expected.len() {
                    return Ok(s.joined.clone());
                }
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                sessions = self
                    .shared()
                    .joined
                    .wait_timeout(sessions, deadline - now)
                    .unwrap()
                    .0;
            }
        } else {
            let mut steps = 0;
            loop {
                if let Some(j) = self.joined(pid) {
                    return Ok(j);
                }
                if steps >= self.config().max_steps || !self.step() {
                    break;
                }
                steps += 1;
            }
        }
        let (protocol, missing) = {
            let sessions = self.shared().sessions.lock().unwrap();
            let s = &sessions[pid];
            let missing = s
                .expected
                .iter()
                .filter(|r| !s.joined.contains_key(*r))
                .cloned()
                .collect();
            (s.protocol.clone(), missing)
        };
        self.teardown(pid);
        Err(RuntimeError::JoinTimeout { protocol, missing })
    }

    fn teardown(&self, pid: &str) {
        self.shared().sessions.lock().unwrap().remove(pid);
        if let Err(e) = self.broker().delete_exchange(pid) {
            log::debug!("teardown: {e}");
        }
    }

    /// Kicks off a session by sending `label` to the actor playing `role`,
    /// as a `become` message.
    pub fn start(
        &self,
        dir: &Directory,
        role: &str,
        label: &str,
        payload: Vec<Value>,
    ) -> Result<(), RuntimeError> {
        let id = *dir
            .roles
            .get(role)
            .ok_or_else(|| RuntimeError::UnknownPeer {
                role: RUNTIME_SENDER.to_string(),
                peer: role.to_string(),
            })?;
        let msg = SessionMessage::new(&dir.protocol_id, SELF_SENDER, role, label, payload);
        self.broker().enqueue(&queue_name(id), msg)?;
        Ok(())
    }

    fn process(&self, slot: &Slot, msg: SessionMessage) {
        {
            let mut actor = slot.actor.lock().unwrap();
            let now = slot.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.0.max_active.fetch_max(now, Ordering::SeqCst);
            actor.handle(self.shared(), msg);
            slot.active.fetch_sub(1, Ordering::SeqCst);
        }
        self.broker().ack();
    }

    /// Handles one message from a randomly chosen non-empty inbox. Returns
    /// false when every inbox is empty.
    pub fn step(&self) -> bool {
        let ready: Vec<Arc<Slot>> = self
            .0
            .actors
            .read()
            .unwrap()
            .iter()
            .filter(|s| self.broker().queue_len(&s.queue).unwrap_or(0) > 0)
            .cloned()
            .collect();
        if ready.is_empty() {
            return false;
        }
        let i = self.0.sched.lock().unwrap().gen_range(0..ready.len());
        let slot = &ready[i];
        match self.broker().try_recv(&slot.queue) {
            Ok(Some(msg)) => self.process(slot, msg),
            Ok(None) | Err(BrokerError::UnknownQueue(_)) => {}
            Err(e) => log::error!("{e}"),
        }
        true
    }

    /// Runs on the calling thread until every inbox is empty.
    pub fn run(&self) -> Result<usize, RuntimeError> {
        let max = self.config().max_steps;
        let mut steps = 0;
        while self.step() {
            steps += 1;
            if steps >= max {
                return Err(RuntimeError::ScenarioTimeout { steps });
            }
        }
        Ok(steps)
    }

    /// Gives every actor its own thread. Actors spawned later get one too.
    pub fn start_threads(&self) {
        if self.0.threaded.swap(true, Ordering::SeqCst) {
            return;
        }
        let actors: Vec<Arc<Slot>> = self.0.actors.read().unwrap().clone();
        for slot in actors {
            self.spawn_worker(slot);
        }
    }

    fn spawn_worker(&self, slot: Arc<Slot>) {
        let rt = self.clone();
        let seed = self.config().seed ^ ((slot.id as u64) << 32);
        let h = std::thread::spawn(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while !rt.0.stop.load(Ordering::SeqCst) {
                match rt
                    .broker()
                    .recv_timeout(&slot.queue, Duration::from_millis(2))
                {
                    Ok(Some(msg)) => {
                        if rng.gen_bool(0.25) {
                            std::thread::yield_now();
                        }
                        rt.process(&slot, msg);
                    }
                    Ok(None) => {}
                    Err(e) => {
                        log::error!("worker: {e}");
                        break;
                    }
                }
            }
        });
        self.0.workers.lock().unwrap().push(h);
    }

    /// Waits until every delivered message has been handled.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        self.broker().wait_quiescent(timeout)
    }

    pub fn stop_threads(&self) {
        self.0.stop.store(true, Ordering::SeqCst);
        let workers: Vec<JoinHandle<()>> = self.0.workers.lock().unwrap().drain(..).collect();
        for w in workers {
            let _ = w.join();
        }
        self.0.stop.store(false, Ordering::SeqCst);
        self.0.threaded.store(false, Ordering::SeqCst);
    }

    /// Runs on worker threads until idle, then stops them.
    pub fn run_threaded(&self, timeout: Duration) -> Result<(), RuntimeError> {
        self.start_threads();
        let idle = self.wait_idle(timeout);
        self.stop_threads();
        if idle {
            Ok(())
        } else {
            Err(RuntimeError::ScenarioTimeout { steps: 0 })
        }
    }

    pub fn trace(&self) -> Vec<TraceEvent> {
        self.shared().trace.lock().unwrap().clone()
    }

    pub fn take_trace(&self) -> Vec<TraceEvent> {
        std::mem::take(&mut *self.shared().trace.lock().unwrap())
    }

    /// Most handlers ever seen running at once inside a single actor.
    pub fn max_active_handlers(&self) -> usize {
        self.0.max_active.load(Ordering::SeqCst)
    }

    /// Every role handle of every actor, ordered by actor then join order.
    pub fn role_statuses(&self) -> Vec<RoleStatus> {
        let actors: Vec<Arc<Slot>> = self.0.actors.read().unwrap().clone();
        let mut out = Vec::new();
        for slot in actors {
            let a = slot.actor.lock().unwrap();
            let core = a.core();
            let mut hs: Vec<&RoleHandle> = core.roles.values().collect();
            hs.sort_by_key(|h| h.seq);
            out.extend(hs.into_iter().map(|h| RoleStatus {
                actor: core.id,
                actor_type: core.actor_type.clone(),
                protocol_id: h.protocol_id.clone(),
                protocol: h.protocol_name.clone(),
                role: h.self_role.clone(),
                complete: h.monitor.is_complete(),
                closed: h.closed,
            }));
        }
        out
    }

    /// A snapshot of one role handle.
    pub fn role_handle(&self, actor: ActorId, protocol_id: &str, role: &str) -> Option<RoleHandle> {
        let slot = self.slot(actor).ok()?;
        let a = slot.actor.lock().unwrap();
        a.core()
            .roles
            .get(&(protocol_id.to_string(), role.to_string()))
            .cloned()
    }

    /// Reads an actor's state.
    pub fn with_state<S: 'static, R>(
        &self,
        actor: ActorId,
        f: impl FnOnce(&S) -> R,
    ) -> Result<R, RuntimeError> {
        let slot = self.slot(actor)?;
        let a = slot.actor.lock().unwrap();
        let s = a
            .state()
            .downcast_ref::<S>()
            .ok_or(RuntimeError::StateType)?;
        Ok(f(s))
    }
}
