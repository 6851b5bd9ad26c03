//! In-process publish/subscribe fabric with one action queue and one event
//! queue per device.
//!
//! Queue paths are `devices/<id>/actions` and `devices/<id>/events`. Delivery
//! to subscribers happens synchronously inside [`Bus::publish`] while the
//! queue is locked, so every subscriber observes a single total order per
//! queue regardless of how many threads publish.

mod fabric;

pub use fabric::{DeviceFabric, SimulatedDevice, Timeline};

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, Clock, DeviceId, DeviceState, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("no queue {0}")]
    UnknownQueue(String),
    #[error("malformed queue path {0:?}")]
    MalformedPath(String),
    #[error("{0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueKind {
    Actions,
    Events,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueueId(String);

impl QueueId {
    pub fn actions(device: &DeviceId) -> Self {
        Self(format!("devices/{device}/actions"))
    }

    pub fn events(device: &DeviceId) -> Self {
        Self(format!("devices/{device}/events"))
    }

    pub fn parse(path: &str) -> Result<(DeviceId, QueueKind), BusError> {
        let malformed = || BusError::MalformedPath(path.to_string());
        let mut parts = path.split('/');
        let (Some("devices"), Some(id), Some(kind), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed());
        };
        if id.is_empty() {
            return Err(malformed());
        }
        let kind = match kind {
            "actions" => QueueKind::Actions,
            "events" => QueueKind::Events,
            _ => return Err(malformed()),
        };
        Ok((DeviceId::new(id), kind))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Payload {
    Action(Action),
    StateChange {
        old: DeviceState,
        new: DeviceState,
        /// Seq of the action message that caused this change, if any.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action_seq: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueMessage {
    pub queue: QueueId,
    pub payload: Payload,
    pub seq: u64,
    pub at: Timestamp,
}

pub type Consumer = Arc<dyn Fn(&QueueMessage) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubscriptionId(u64);

#[derive(Default)]
struct QueueState {
    next_seq: u64,
    subscribers: Vec<(SubscriptionId, Consumer)>,
    // Kept for the session; the command log is the durable record.
    history: Vec<QueueMessage>,
}

struct Inner {
    clock: Arc<dyn Clock>,
    queues: RwLock<HashMap<QueueId, Arc<Mutex<QueueState>>>>,
    taps: Mutex<Vec<(SubscriptionId, Consumer)>>,
    next_sub: AtomicU64,
}

#[derive(Clone)]
pub struct Bus {
    inner: Arc<Inner>,
}

impl fmt::Debug for Bus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bus")
            .field("queues", &self.inner.queues.read().unwrap().len())
            .finish()
    }
}

impl Bus {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            inner: Arc::new(Inner {
                clock,
                queues: RwLock::new(HashMap::new()),
                taps: Mutex::new(Vec::new()),
                next_sub: AtomicU64::new(1),
            }),
        }
    }

    /// Creates the action and event queues for a device. Idempotent.
    pub fn register_device(&self, device: &DeviceId) {
        let mut queues = self.inner.queues.write().unwrap();
        for q in [QueueId::actions(device), QueueId::events(device)] {
            queues.entry(q).or_default();
        }
    }

    pub fn has_queue(&self, queue: &QueueId) -> bool {
        self.inner.queues.read().unwrap().contains_key(queue)
    }

    fn queue(&self, queue: &QueueId) -> Result<Arc<Mutex<QueueState>>, BusError> {
        QueueId::parse(queue.as_str())?;
        self.inner
            .queues
            .read()
            .unwrap()
            .get(queue)
            .cloned()
            .ok_or_else(|| BusError::UnknownQueue(queue.to_string()))
    }

    fn next_subscription(&self) -> SubscriptionId {
        SubscriptionId(self.inner.next_sub.fetch_add(1, Ordering::Relaxed))
    }

    /// Publishes a message and delivers it to every subscriber before returning.
    ///
    /// Consumers must not publish to the queue they are subscribed to.
    pub fn publish(&self, queue: &QueueId, payload: Payload) -> Result<u64, BusError> {
        let q = self.queue(queue)?;
        let mut state = q.lock().unwrap();
        state.next_seq += 1;
        let msg = QueueMessage {
            queue: queue.clone(),
            payload,
            seq: state.next_seq,
            at: self.inner.clock.now(),
        };
        let taps: Vec<Consumer> = self
            .inner
            .taps
            .lock()
            .unwrap()
            .iter()
            .map(|(_, c)| c.clone())
            .collect();
        for tap in taps {
            tap(&msg);
        }
        let subscribers: Vec<Consumer> = state.subscribers.iter().map(|(_, c)| c.clone()).collect();
        for consumer in subscribers {
            consumer(&msg);
        }
        let seq = msg.seq;
        state.history.push(msg);
        Ok(seq)
    }

    /// Delivers every message published to `queue` after this call.
    pub fn subscribe(
        &self,
        queue: &QueueId,
        consumer: impl Fn(&QueueMessage) + Send + Sync + 'static,
    ) -> Result<SubscriptionId, BusError> {
        let q = self.queue(queue)?;
        let id = self.next_subscription();
        q.lock().unwrap().subscribers.push((id, Arc::new(consumer)));
        Ok(id)
    }

    /// Receives all traffic on all queues.
    pub fn tap(&self, consumer: impl Fn(&QueueMessage) + Send + Sync + 'static) -> SubscriptionId {
        let id = self.next_subscription();
        self.inner.taps.lock().unwrap().push((id, Arc::new(consumer)));
        id
    }

    /// Returns whether anything was removed.
    pub fn unsubscribe(&self, id: SubscriptionId) -> bool {
        let mut removed = false;
        {
            let mut taps = self.inner.taps.lock().unwrap();
            let before = taps.len();
            taps.retain(|(s, _)| *s != id);
            removed |= taps.len() != before;
        }
        for q in self.inner.queues.read().unwrap().values() {
            let mut state = q.lock().unwrap();
            let before = state.subscribers.len();
            state.subscribers.retain(|(s, _)| *s != id);
            removed |= state.subscribers.len() != before;
        }
        removed
    }

    pub fn subscriber_count(&self, queue: &QueueId) -> usize {
        self.queue(queue)
            .map(|q| q.lock().unwrap().subscribers.len())
            .unwrap_or(0)
    }

    /// Messages published on `queue` during this session.
    pub fn history(&self, queue: &QueueId) -> Vec<QueueMessage> {
        self.queue(queue)
            .map(|q| q.lock().unwrap().history.clone())
            .unwrap_or_default()
    }
}
