//! In-process message broker with direct, round-robin and broadcast exchanges.
//!
//! Queues are FIFO and single-reader. Exchanges can be bound to queues or to
//! other exchanges, which is how actor-type discovery chains a per-protocol
//! exchange onto a per-type round-robin exchange.

mod message;

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::RngCore;
use thiserror::Error;

pub use message::{RecordError, SessionMessage, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeKind {
    Direct,
    RoundRobin,
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Queue(String),
    Exchange(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub key: String,
    pub target: Target,
}

#[derive(Debug)]
struct Exchange {
    kind: ExchangeKind,
    bindings: Vec<Binding>,
    rr_cursor: usize,
}

#[derive(Debug, Default)]
struct Queue {
    buffer: Mutex<VecDeque<SessionMessage>>,
    ready: Condvar,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrokerError {
    #[error("exchange `{0}` already exists")]
    DuplicateExchange(String),
    #[error("queue `{0}` already exists")]
    DuplicateQueue(String),
    #[error("unknown exchange `{0}`")]
    UnknownExchange(String),
    #[error("unknown queue `{0}`")]
    UnknownQueue(String),
    #[error("no binding on `{exchange}` matches routing key `{key}`")]
    Unroutable { exchange: String, key: String },
    #[error("binding `{0}` would route messages in a cycle")]
    Cycle(String),
}

/// Thread-safe broker; clone the `Arc` to share it.
#[derive(Debug, Default)]
pub struct Broker {
    exchanges: RwLock<HashMap<String, Mutex<Exchange>>>,
    queues: RwLock<HashMap<String, Arc<Queue>>>,
    in_flight: AtomicUsize,
    idle: (Mutex<()>, Condvar),
}

/// Copies a publish would deliver, resolved before any enqueue.
type Deliveries = Vec<(Arc<Queue>, SessionMessage)>;

impl Broker {
    pub fn new() -> Arc<Self> {
        Arc::new(Broker::default())
    }

    pub fn declare_exchange(&self, name: &str, kind: ExchangeKind) -> Result<String, BrokerError> {
        let mut ex = self.exchanges.write().unwrap();
        if ex.contains_key(name) {
            return Err(BrokerError::DuplicateExchange(name.to_string()));
        }
        ex.insert(
            name.to_string(),
            Mutex::new(Exchange {
                kind,
                bindings: Vec::new(),
                rr_cursor: 0,
            }),
        );
        Ok(name.to_string())
    }

    pub fn has_exchange(&self, name: &str) -> bool {
        self.exchanges.read().unwrap().contains_key(name)
    }

    pub fn delete_exchange(&self, name: &str) -> Result<(), BrokerError> {
        let mut ex = self.exchanges.write().unwrap();
        ex.remove(name)
            .ok_or_else(|| BrokerError::UnknownExchange(name.to_string()))?;
        let gone = Target::Exchange(name.to_string());
        for e in ex.values() {
            e.lock().unwrap().bindings.retain(|b| b.target != gone);
        }
        Ok(())
    }

    pub fn declare_queue(&self, name: &str) -> Result<String, BrokerError> {
        let mut qs = self.queues.write().unwrap();
        if qs.contains_key(name) {
            return Err(BrokerError::DuplicateQueue(name.to_string()));
        }
        qs.insert(name.to_string(), Arc::new(Queue::default()));
        Ok(name.to_string())
    }

    fn queue(&self, name: &str) -> Result<Arc<Queue>, BrokerError> {
        self.queues
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| BrokerError::UnknownQueue(name.to_string()))
    }

    /// Binds a queue. Round-robin and broadcast exchanges ignore the key.
    pub fn bind(&self, exchange: &str, key: &str, queue: &str) -> Result<(), BrokerError> {
        self.queue(queue)?;
        self.add_binding(exchange, key, Target::Queue(queue.to_string()))
    }

    /// Binds another exchange as a target; a message it receives is
    /// republished there with the same routing key.
    pub fn bind_exchange(
        &self,
        exchange: &str,
        key: &str,
        target: &str,
    ) -> Result<(), BrokerError> {
        if !self.has_exchange(target) {
            return Err(BrokerError::UnknownExchange(target.to_string()));
        }
        if self.reaches(target, exchange) {
            return Err(BrokerError::Cycle(format!("{exchange} -> {target}")));
        }
        self.add_binding(exchange, key, Target::Exchange(target.to_string()))
    }

    fn reaches(&self, from: &str, to: &str) -> bool {
        if from == to {
            return true;
        }
        let next: Vec<String> = {
            let ex = self.exchanges.read().unwrap();
            let Some(e) = ex.get(from) else { return false };
            let e = e.lock().unwrap();
            e.bindings
                .iter()
                .filter_map(|b| match &b.target {
                    Target::Exchange(n) => Some(n.clone()),
                    Target::Queue(_) => None,
                })
                .collect()
        };
        next.iter().any(|n| self.reaches(n, to))
    }

    fn add_binding(&self, exchange: &str, key: &str, target: Target) -> Result<(), BrokerError> {
        let ex = self.exchanges.read().unwrap();
        let mut e = ex
            .get(exchange)
            .ok_or_else(|| BrokerError::UnknownExchange(exchange.to_string()))?
            .lock()
            .unwrap();
        let key = match e.kind {
            ExchangeKind::Direct => key.to_string(),
            _ => String::new(),
        };
        if !e
            .bindings
            .iter()
            .any(|b| b.key == key && b.target == target)
        {
            e.bindings.push(Binding { key, target });
        }
        Ok(())
    }

    /// Removes every binding on `exchange` with this key and queue.
    pub fn unbind(&self, exchange: &str, key: &str, queue: &str) -> Result<(), BrokerError> {
        let ex = self.exchanges.read().unwrap();
        let mut e = ex
            .get(exchange)
            .ok_or_else(|| BrokerError::UnknownExchange(exchange.to_string()))?
            .lock()
            .unwrap();
        let target = Target::Queue(queue.to_string());
        let direct = e.kind == ExchangeKind::Direct;
        e.bindings
            .retain(|b| !(b.target == target && (!direct || b.key == key)));
        let len = e.bindings.len();
        if e.rr_cursor >= len {
            e.rr_cursor = 0;
        }
        Ok(())
    }

    pub fn bindings(&self, exchange: &str) -> Result<Vec<Binding>, BrokerError> {
        let ex = self.exchanges.read().unwrap();
        let e = ex
            .get(exchange)
            .ok_or_else(|| BrokerError::UnknownExchange(exchange.to_string()))?
            .lock()
            .unwrap();
        Ok(e.bindings.clone())
    }

    fn route(
        &self,
        exchange: &str,
        key: &str,
        msg: &SessionMessage,
        out: &mut Deliveries,
    ) -> Result<(), BrokerError> {
        let targets: Vec<Target> = {
            let ex = self.exchanges.read().unwrap();
            let mut e = ex
                .get(exchange)
                .ok_or_else(|| BrokerError::UnknownExchange(exchange.to_string()))?
                .lock()
                .unwrap();
            match e.kind {
                ExchangeKind::Direct => e
                    .bindings
                    .iter()
                    .filter(|b| b.key == key)
                    .map(|b| b.target.clone())
                    .collect(),
                ExchangeKind::Broadcast => e.bindings.iter().map(|b| b.target.clone()).collect(),
                ExchangeKind::RoundRobin => {
                    if e.bindings.is_empty() {
                        Vec::new()
                    } else {
                        let i = e.rr_cursor % e.bindings.len();
                        e.rr_cursor = (i + 1) % e.bindings.len();
                        vec![e.bindings[i].target.clone()]
                    }
                }
            }
        };
        if targets.is_empty() {
            return Err(BrokerError::Unroutable {
                exchange: exchange.to_string(),
                key: key.to_string(),
            });
        }
        for t in targets {
            match t {
                Target::Queue(q) => out.push((self.queue(&q)?, msg.clone())),
                Target::Exchange(x) => self.route(&x, key, msg, out)?,
            }
        }
        Ok(())
    }

    /// Enqueues every copy while holding all target queues, so a multicast
    /// is visible everywhere before any receiver can react to it.
    fn deliver(&self, deliveries: Deliveries) -> usize {
        let n = deliveries.len();
        self.in_flight.fetch_add(n, Ordering::SeqCst);
        let mut targets: Vec<&Arc<Queue>> = deliveries.iter().map(|(q, _)| q).collect();
        targets.sort_by_key(|q| Arc::as_ptr(q));
        targets.dedup_by_key(|q| Arc::as_ptr(q));
        let mut guards: Vec<_> = targets
            .iter()
            .map(|q| (Arc::as_ptr(q), q.buffer.lock().unwrap()))
            .collect();
        for (q, m) in &deliveries {
            let g = guards
                .iter_mut()
                .find(|(p, _)| *p == Arc::as_ptr(q))
                .expect("locked above");
            g.1.push_back(m.clone());
        }
        drop(guards);
        for q in targets {
            q.ready.notify_one();
        }
        n
    }

    /// Routes `msg` and returns the number of copies delivered.
    ///
    /// An unroutable message is dropped, logged and reported as an error.
    pub fn publish(
        &self,
        exchange: &str,
        key: &str,
        msg: SessionMessage,
    ) -> Result<usize, BrokerError> {
        let mut out = Vec::new();
        match self.route(exchange, key, &msg, &mut out) {
            Ok(()) => Ok(self.deliver(out)),
            Err(e) => {
                if let BrokerError::Unroutable { .. } = e {
                    log::warn!("dropping message: {e}");
                }
                Err(e)
            }
        }
    }

    /// Publishes a batch all-or-nothing: if any message cannot be routed,
    /// nothing is delivered.
    pub fn publish_many(
        &self,
        exchange: &str,
        batch: Vec<(String, SessionMessage)>,
    ) -> Result<usize, BrokerError> {
        let mut out = Vec::new();
        for (key, msg) in &batch {
            self.route(exchange, key, msg, &mut out)?;
        }
        Ok(self.deliver(out))
    }

    /// Puts `msg` straight onto a queue.
    pub fn enqueue(&self, queue: &str, msg: SessionMessage) -> Result<(), BrokerError> {
        let q = self.queue(queue)?;
        self.deliver(vec![(q, msg)]);
        Ok(())
    }

    pub fn try_recv(&self, queue: &str) -> Result<Option<SessionMessage>, BrokerError> {
        Ok(self.queue(queue)?.buffer.lock().unwrap().pop_front())
    }

    pub fn recv_timeout(
        &self,
        queue: &str,
        timeout: Duration,
    ) -> Result<Option<SessionMessage>, BrokerError> {
        let q = self.queue(queue)?;
        let deadline = Instant::now() + timeout;
        let mut buf = q.buffer.lock().unwrap();
        loop {
            if let Some(m) = buf.pop_front() {
                return Ok(Some(m));
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            buf = q.ready.wait_timeout(buf, deadline - now).unwrap().0;
        }
    }

    pub fn queue_len(&self, queue: &str) -> Result<usize, BrokerError> {
        Ok(self.queue(queue)?.buffer.lock().unwrap().len())
    }

    /// Marks one received message as fully handled.
    pub fn ack(&self) {
        let prev = self.in_flight.fetch_sub(1, Ordering::SeqCst);
        debug_assert!(prev > 0, "ack without a matching delivery");
        if prev == 1 {
            let _g = self.idle.0.lock().unwrap();
            self.idle.1.notify_all();
        }
    }

    /// Delivered messages not yet acked.
    pub fn in_flight(&self) -> usize {
        self.in_flight.load(Ordering::SeqCst)
    }

    /// Blocks until every delivered message has been acked, or the timeout
    /// passes. Returns true when quiescent.
    pub fn wait_quiescent(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut g = self.idle.0.lock().unwrap();
        loop {
            if self.in_flight() == 0 {
                return true;
            }
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            let step = (deadline - now).min(Duration::from_millis(20));
            g = self.idle.1.wait_timeout(g, step).unwrap().0;
        }
    }
}

/// 128 random bits as 32 lowercase hex characters.
pub fn fresh_protocol_id(rng: &mut impl RngCore) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}
